"""Special functions evaluated in a numerically safe way.

The CIR transition density needs ``log I_q(x)`` for orders in the hundreds
and arguments in the thousands, far past the overflow point of the plain
Bessel function.  Everything here therefore works with logarithms, and the
Bessel routine internally computes the exponentially scaled quantity
``log I_q(x) - x`` so callers can combine it with ``-(u + v)`` without
cancellation.

Three regimes are used for the Bessel function:

* a power series, summed with a running ratio, when ``x <= 30`` or when the
  largest series term sits at a small index (so few terms are needed);
* the large-argument (Hankel) expansion when ``x >= 4 q**2``;
* the uniform large-order (Debye) expansion otherwise.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ._backend import USE_NUMBA, njit
from .errors import DomainError

__all__ = [
    "ln_gamma",
    "polygamma",
    "log_bessel_i",
    "log_bessel_i_scaled",
    "LogDomainValue",
]


class LogDomainValue(float):
    """A float holding the natural log of a nonnegative quantity.

    ``-inf`` encodes zero.  The class only documents intent; arithmetic
    behaves like ``float``.
    """

    @property
    def value(self) -> float:
        return math.exp(self)


# ---------------------------------------------------------------------------
# log-gamma and polygamma
# ---------------------------------------------------------------------------

def ln_gamma(x: float) -> float:
    """Natural logarithm of the gamma function for positive ``x``.

    Parameters
    ----------
    x : float
        Positive, finite argument.

    Returns
    -------
    float
        ``log Gamma(x)``.
    """
    x = float(x)
    if not (x > 0.0 and math.isfinite(x)):
        raise DomainError(f"ln_gamma requires a positive finite argument, got {x!r}")
    return math.lgamma(x)


# Even-index Bernoulli numbers B_2 .. B_20.
_BERNOULLI_EVEN = np.array([
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0,
    -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0, 43867.0 / 798.0,
    -174611.0 / 330.0,
])
_SHIFT_TO = 10.0


def polygamma(order: int, x):
    """Polygamma function ``psi^(order)(x)`` for orders 0 to 3.

    The argument is shifted upward by the recurrence
    ``psi^(n)(x) = psi^(n)(x + 1) - (-1)**n n! / x**(n + 1)`` until it exceeds
    10, then the Bernoulli asymptotic series is summed.

    Parameters
    ----------
    order : int
        0 (digamma), 1 (trigamma), 2 or 3.
    x : float or array_like
        Positive argument(s).

    Returns
    -------
    float or numpy.ndarray
        Same shape as ``x``.
    """
    if isinstance(order, bool) or int(order) != order or not 0 <= order <= 3:
        raise DomainError(f"polygamma order must be an integer in 0..3, got {order!r}")
    n = int(order)
    xa = np.asarray(x, dtype=float)
    if xa.size and not (np.all(np.isfinite(xa)) and np.all(xa > 0.0)):
        raise DomainError("polygamma requires positive finite arguments")
    y = np.array(xa, dtype=float, copy=True)
    acc = np.zeros_like(y)
    sign_n = -1.0 if n % 2 else 1.0
    fact_n = math.factorial(n)
    small = y < _SHIFT_TO
    while np.any(small):
        acc[small] -= sign_n * fact_n / y[small] ** (n + 1)
        y[small] += 1.0
        small = y < _SHIFT_TO
    inv2 = 1.0 / (y * y)
    if n == 0:
        series = np.zeros_like(y)
        pw = inv2.copy()
        for k, b in enumerate(_BERNOULLI_EVEN, start=1):
            series += b / (2 * k) * pw
            pw = pw * inv2
        out = np.log(y) - 0.5 / y - series
    else:
        total = math.factorial(n - 1) / y ** n + fact_n / (2.0 * y ** (n + 1))
        pw = inv2 / y ** n
        for k, b in enumerate(_BERNOULLI_EVEN, start=1):
            coef = b * math.factorial(2 * k + n - 1) / math.factorial(2 * k)
            total = total + coef * pw
            pw = pw * inv2
        out = (1.0 if n % 2 else -1.0) * total
    out = out + acc
    if np.ndim(x) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Debye polynomial coefficients, generated exactly at import
# ---------------------------------------------------------------------------

def _debye_polynomials(nterms: int):
    """Coefficient table of the Debye polynomials ``U_0 .. U_{nterms-1}``.

    Uses the recursion
    ``U_{k+1}(p) = p^2 (1 - p^2) U_k'(p) / 2 + (1/8) int_0^p (1 - 5 t^2) U_k(t) dt``
    in exact rational arithmetic.
    """
    polys = [[Fraction(1)]]
    for _ in range(nterms - 1):
        u = polys[-1]
        deriv = [i * c for i, c in enumerate(u)][1:]
        new = [Fraction(0)] * (len(u) + 3)
        # p^2 (1 - p^2) U' / 2
        for i, c in enumerate(deriv):
            new[i + 2] += c / 2
            new[i + 4] -= c / 2
        # (1/8) integral of (1 - 5 t^2) U
        for i, c in enumerate(u):
            new[i + 1] += c / (8 * (i + 1))
            new[i + 3] -= 5 * c / (8 * (i + 3))
        while new and new[-1] == 0:
            new.pop()
        polys.append(new)
    # U_k(p) = p**k * sum_j c[k, j] p**(2 j) for j = 0..k; store c only
    table = np.zeros((nterms, nterms))
    for k, p in enumerate(polys):
        p = p + [Fraction(0)] * (3 * k + 1 - len(p))
        table[k, : k + 1] = [float(p[k + 2 * j]) for j in range(k + 1)]
    return table


_DEBYE = _debye_polynomials(13)
_SERIES_X = 30.0
_SERIES_PEAK = 60.0
_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# scalar kernel (numba)
# ---------------------------------------------------------------------------

@njit
def _log_ive_series_nb(q, x):
    half = 0.5 * x
    quarter = half * half
    term = 1.0
    total = 1.0
    k = 0
    while k < 100000:
        k += 1
        term *= quarter / (k * (k + q))
        total += term
        if term < 1e-17 * total and k * (k + q) > quarter:
            break
    return q * math.log(half) - math.lgamma(q + 1.0) + math.log(total) - x


@njit
def _log_ive_hankel_nb(q, x):
    mu = 4.0 * q * q
    term = 1.0
    total = 1.0
    prev = 1.0
    for k in range(1, 80):
        odd = 2.0 * k - 1.0
        term *= -(mu - odd * odd) / (8.0 * k * x)
        at = abs(term)
        if at > prev:
            break
        total += term
        prev = at
        if at < 1e-17 * abs(total):
            break
    return -0.5 * (_LOG_2PI + math.log(x)) + math.log(total)


@njit
def _log_ive_debye_nb(q, x, coef):
    z = x / q
    s = math.sqrt(1.0 + z * z)
    p = 1.0 / s
    # eta - z with the cancellation between sqrt(1+z^2) and z removed
    eta_minus_z = 1.0 / (s + z) + math.log1p(-(1.0 + 1.0 / (s + z)) / (1.0 + s))
    p2 = p * p
    ratio = p / q
    total = 0.0
    scale = 1.0
    for k in range(coef.shape[0]):
        acc = 0.0
        for j in range(k, -1, -1):
            acc = acc * p2 + coef[k, j]
        contrib = acc * scale
        total += contrib
        if k > 0 and abs(contrib) < 1e-17 * abs(total):
            break
        scale *= ratio
    # -0.5 log(2 pi q) - 0.25 log(1 + z^2) folded into one logarithm
    return q * eta_minus_z - 0.5 * (_LOG_2PI + math.log(q * s)) + math.log(total)


@njit
def _log_ive_scalar_nb(q, x, coef):
    if x == 0.0:
        return 0.0 if q == 0.0 else -np.inf
    if x <= 30.0:
        return _log_ive_series_nb(q, x)
    peak = 0.5 * (math.sqrt(q * q + x * x) - q)
    if peak <= 60.0:
        return _log_ive_series_nb(q, x)
    if x >= 4.0 * q * q:
        return _log_ive_hankel_nb(q, x)
    return _log_ive_debye_nb(q, x, coef)


@njit
def _log_ive_array_nb(q, x, coef):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _log_ive_scalar_nb(q[i], x[i], coef)
    return out


def log_ive_nb(q, x):
    """Scaled ``log I_q(x) - x`` through the compiled kernel (1-d arrays)."""
    q = np.ascontiguousarray(q, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    return _log_ive_array_nb(q, x, _DEBYE)


# ---------------------------------------------------------------------------
# vectorised twin (numpy)
# ---------------------------------------------------------------------------

def _series_np(q, x):
    half = 0.5 * x
    quarter = half * half
    term = np.ones_like(x)
    total = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    k = 0
    while np.any(active) and k < 100000:
        k += 1
        denom = k * (k + q)
        term = np.where(active, term * quarter / denom, term)
        total = np.where(active, total + term, total)
        active &= ~((term < 1e-17 * total) & (denom > quarter))
    from scipy.special import gammaln  # vectorised lgamma
    return q * np.log(half) - gammaln(q + 1.0) + np.log(total) - x


def _hankel_np(q, x):
    mu = 4.0 * q * q
    term = np.ones_like(x)
    total = np.ones_like(x)
    prev = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 80):
        if not np.any(active):
            break
        odd = 2.0 * k - 1.0
        cand = term * (-(mu - odd * odd) / (8.0 * k * x))
        grow = np.abs(cand) > prev
        active &= ~grow
        term = np.where(active, cand, term)
        total = np.where(active, total + term, total)
        prev = np.where(active, np.abs(term), prev)
        active &= ~(np.abs(term) < 1e-17 * np.abs(total))
    return -0.5 * (_LOG_2PI + np.log(x)) + np.log(total)


def _debye_np(q, x):
    z = x / q
    s = np.sqrt(1.0 + z * z)
    p = 1.0 / s
    eta_minus_z = 1.0 / (s + z) + np.log1p(-(1.0 + 1.0 / (s + z)) / (1.0 + s))
    p2 = p * p
    ratio = p / q
    total = np.zeros_like(x)
    scale = np.ones_like(x)
    for k in range(_DEBYE.shape[0]):
        acc = np.zeros_like(x)
        for c in _DEBYE[k, k::-1]:
            acc = acc * p2 + c
        total = total + acc * scale
        scale = scale * ratio
    return q * eta_minus_z - 0.5 * (_LOG_2PI + np.log(q * s)) + np.log(total)


def log_ive_np(q, x):
    """Scaled ``log I_q(x) - x`` through the vectorised numpy path."""
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    q, x = np.broadcast_arrays(q, x)
    q = q.ravel()
    x = x.ravel()
    out = np.empty_like(x)
    zero = x == 0.0
    out[zero] = np.where(q[zero] == 0.0, 0.0, -np.inf)
    peak = 0.5 * (np.sqrt(q * q + x * x) - q)
    series = ~zero & ((x <= _SERIES_X) | (peak <= _SERIES_PEAK))
    hankel = ~zero & ~series & (x >= 4.0 * q * q)
    debye = ~zero & ~series & ~hankel
    if np.any(series):
        out[series] = _series_np(q[series], x[series])
    if np.any(hankel):
        out[hankel] = _hankel_np(q[hankel], x[hankel])
    if np.any(debye):
        out[debye] = _debye_np(q[debye], x[debye])
    return out


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def _check_bessel_args(order, x):
    q = np.asarray(order, dtype=float)
    xa = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(xa))):
        raise DomainError("log_bessel_i requires finite order and argument")
    if np.any(q < 0.0) or np.any(xa < 0.0):
        raise DomainError("log_bessel_i requires order >= 0 and x >= 0")
    return q, xa


def log_bessel_i_scaled(order, x):
    """Exponentially scaled log Bessel function, ``log I_order(x) - x``.

    Parameters
    ----------
    order : float or array_like
        Order ``q >= 0``.
    x : float or array_like
        Argument ``x >= 0``; broadcast against ``order``.

    Returns
    -------
    float or numpy.ndarray
    """
    q, xa = _check_bessel_args(order, x)
    shape = np.broadcast(q, xa).shape
    qb, xb = (np.broadcast_to(a, shape).ravel() for a in (q, xa))
    out = log_ive_nb(qb, xb) if USE_NUMBA else log_ive_np(qb, xb)
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def log_bessel_i(order, x):
    """Natural log of the modified Bessel function of the first kind.

    Parameters
    ----------
    order : float or array_like
        Order ``q >= 0``.
    x : float or array_like
        Argument ``x >= 0``.

    Returns
    -------
    float or numpy.ndarray
        ``log I_q(x)``; ``-inf`` when ``x == 0`` and ``q > 0``.

    Examples
    --------
    >>> round(log_bessel_i(0.5, 2.0), 7)
    0.7160024
    """
    scaled = log_bessel_i_scaled(order, x)
    return scaled + (np.asarray(x, dtype=float) if np.ndim(scaled) else float(x))
