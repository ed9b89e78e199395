"""Single-mark mathematics for the Cox-Ingersoll-Ross growth diffusion.

Each individual's size follows

    dY = growth_rate * (1 - Y / capacity) dt + diffusion * sqrt(Y) dW,

a square-root diffusion whose transition law is a scaled noncentral
chi-square and whose stationary law is a Gamma distribution.  Densities are
only ever exposed as logarithms: the noncentrality ``u`` and the scaled target
``v`` routinely reach the thousands, where the linear-domain density
overflows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._backend import USE_NUMBA, njit
from .errors import DomainError
from .specfun import _DEBYE, _log_ive_scalar_nb, log_ive_np

__all__ = [
    "CirParams",
    "CirTransitionTerms",
    "GammaShapeScale",
    "transition_terms",
    "transition_log_pdf",
    "transition_mean",
    "transition_var",
    "stationary_log_pdf",
    "stationary_shape_scale",
    "stationary_covariance",
    "sample_transition",
    "sample_stationary",
    "euler_path",
]


@dataclass(frozen=True)
class CirParams:
    """Parameters of the growth diffusion.

    Attributes
    ----------
    growth_rate : float
        Drift strength ``lambda > 0`` (1/time).
    capacity : float
        Carrying capacity ``K > 0``; the long-run mean size.
    diffusion : float
        Noise level ``sigma``.  Must satisfy ``2 * growth_rate >= diffusion**2``
        so that the process stays strictly positive.  ``diffusion == 0`` is
        accepted and describes the deterministic growth curve; only the Euler
        scheme can simulate it, and every density function rejects it.
    """

    growth_rate: float
    capacity: float
    diffusion: float

    def __post_init__(self):
        for name in ("growth_rate", "capacity", "diffusion"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float, np.floating, np.integer))
                    and math.isfinite(val)):
                raise DomainError(f"{name} must be a finite real number, got {val!r}")
            object.__setattr__(self, name, float(val))
        if self.growth_rate <= 0.0:
            raise DomainError(f"growth_rate must be positive, got {self.growth_rate}")
        if self.capacity <= 0.0:
            raise DomainError(f"capacity must be positive, got {self.capacity}")
        if self.diffusion < 0.0:
            raise DomainError(f"diffusion must be nonnegative, got {self.diffusion}")
        if 2.0 * self.growth_rate < self.diffusion ** 2:
            raise DomainError(
                "positivity constraint violated: need 2*growth_rate >= diffusion**2, "
                f"got 2*{self.growth_rate} < {self.diffusion}**2"
            )

    @property
    def shape(self) -> float:
        """Stationary Gamma shape ``2 lambda / sigma**2``."""
        self._require_noise()
        return 2.0 * self.growth_rate / self.diffusion ** 2

    @property
    def order(self) -> float:
        """Bessel order ``q = 2 lambda / sigma**2 - 1`` of the transition law."""
        return self.shape - 1.0

    @property
    def reversion_rate(self) -> float:
        """Mean-reversion speed ``lambda / K``."""
        return self.growth_rate / self.capacity

    def as_tuple(self):
        return (self.growth_rate, self.capacity, self.diffusion)

    def _require_noise(self):
        if self.diffusion == 0.0:
            raise DomainError("the transition and stationary laws need diffusion > 0")


@dataclass(frozen=True)
class CirTransitionTerms:
    """Intermediates of the transition density.

    ``v`` is the multiplier that turns a target size into the scaled target:
    ``v(y_to) = v * y_to``.  It equals ``a``.
    """

    a: float
    u: float
    v: float
    q: float

    def scaled_target(self, y_to):
        return self.v * np.asarray(y_to, dtype=float)


@dataclass(frozen=True)
class GammaShapeScale:
    """Shape and scale of a Gamma law; for the stationary law shape*scale = K."""

    shape: float
    scale: float

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def var(self) -> float:
        return self.shape * self.scale ** 2


def _check_positive(name, arr):
    a = np.asarray(arr, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(a > 0.0)):
        raise DomainError(f"{name} must be positive and finite")
    return a


def transition_terms(dt: float, y_from: float, params: CirParams) -> CirTransitionTerms:
    """Compute ``a``, ``u``, the target multiplier and the order ``q``.

    Parameters
    ----------
    dt : float
        Elapsed time, ``dt > 0``.
    y_from : float
        Starting size, ``y_from > 0``.
    params : CirParams

    Returns
    -------
    CirTransitionTerms
    """
    dt = float(_check_positive("dt", dt))
    y_from = float(_check_positive("y_from", y_from))
    params._require_noise()
    lam, cap, sig = params.as_tuple()
    rate = lam / cap
    a = 2.0 * lam / (sig * sig * cap * -math.expm1(-rate * dt))
    u = a * y_from * math.exp(-rate * dt)
    return CirTransitionTerms(a=a, u=u, v=a, q=2.0 * lam / (sig * sig) - 1.0)


# ---------------------------------------------------------------------------
# log transition density kernels
# ---------------------------------------------------------------------------

@njit
def _cir_logpdf_nb(dt, y_to, y_from, lam, cap, sig, coef):
    rate = lam / cap
    s2 = sig * sig
    a = 2.0 * lam / (s2 * cap * -math.expm1(-rate * dt))
    u = a * y_from * math.exp(-rate * dt)
    v = a * y_to
    q = 2.0 * lam / s2 - 1.0
    if u == 0.0:
        # transition law has forgotten its start: Gamma(q + 1, 1 / a)
        return math.log(a) - v + q * math.log(v) - math.lgamma(q + 1.0)
    su = math.sqrt(u)
    sv = math.sqrt(v)
    diff = su - sv
    return (math.log(a) - diff * diff + 0.5 * q * (math.log(v) - math.log(u))
            + _log_ive_scalar_nb(q, 2.0 * su * sv, coef))


@njit
def _cir_logpdf_array_nb(dt, y_to, y_from, lam, cap, sig, coef):
    n = dt.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _cir_logpdf_nb(dt[i], y_to[i], y_from[i], lam, cap, sig, coef)
    return out


@njit
def _cir_logpdf_sum_nb(dt, y_to, y_from, lam, cap, sig, coef):
    total = 0.0
    for i in range(dt.shape[0]):
        total += _cir_logpdf_nb(dt[i], y_to[i], y_from[i], lam, cap, sig, coef)
    return total


def logpdf_nb(dt, y_to, y_from, lam, cap, sig):
    """Compiled log transition density over matching 1-d arrays."""
    return _cir_logpdf_array_nb(np.ascontiguousarray(dt, dtype=float),
                                np.ascontiguousarray(y_to, dtype=float),
                                np.ascontiguousarray(y_from, dtype=float),
                                float(lam), float(cap), float(sig), _DEBYE)


def logpdf_np(dt, y_to, y_from, lam, cap, sig):
    """Vectorised numpy log transition density over matching arrays."""
    from scipy.special import gammaln

    dt = np.asarray(dt, dtype=float)
    y_to = np.asarray(y_to, dtype=float)
    y_from = np.asarray(y_from, dtype=float)
    rate = lam / cap
    s2 = sig * sig
    a = 2.0 * lam / (s2 * cap * -np.expm1(-rate * dt))
    u = a * y_from * np.exp(-rate * dt)
    v = a * y_to
    q = 2.0 * lam / s2 - 1.0
    a, u, v = np.broadcast_arrays(a, u, v)
    out = np.empty(a.shape)
    zero = u == 0.0
    if np.any(zero):
        out[zero] = np.log(a[zero]) - v[zero] + q * np.log(v[zero]) - gammaln(q + 1.0)
    pos = ~zero
    if np.any(pos):
        su = np.sqrt(u[pos])
        sv = np.sqrt(v[pos])
        w = 2.0 * su * sv
        out[pos] = (np.log(a[pos]) - (su - sv) ** 2
                    + 0.5 * q * (np.log(v[pos]) - np.log(u[pos]))
                    + log_ive_np(np.full(w.shape, q), w))
    return out


def logpdf_sum_nb(dt, y_to, y_from, lam, cap, sig) -> float:
    return _cir_logpdf_sum_nb(dt, y_to, y_from, float(lam), float(cap),
                              float(sig), _DEBYE)


def logpdf_sum_np(dt, y_to, y_from, lam, cap, sig) -> float:
    if len(dt) == 0:
        return 0.0
    return float(np.sum(logpdf_np(dt, y_to, y_from, lam, cap, sig)))


logpdf_sum = logpdf_sum_nb if USE_NUMBA else logpdf_sum_np


def transition_log_pdf(dt: ArrayLike, y_to: ArrayLike, y_from: ArrayLike,
                       params: CirParams):
    """Log density of the size after ``dt`` given the size ``y_from``.

    Evaluates ``log a - (u + v) + (q/2) log(v/u) + log I_q(2 sqrt(u v))``
    with the Bessel term taken in exponentially scaled form, so the result is
    finite for every positive input.

    Parameters
    ----------
    dt, y_to, y_from : float or array_like
        Elapsed time and target/start sizes, all positive; broadcast together.
    params : CirParams

    Returns
    -------
    float or numpy.ndarray
    """
    dt = _check_positive("dt", dt)
    y_to = _check_positive("y_to", y_to)
    y_from = _check_positive("y_from", y_from)
    params._require_noise()
    shape = np.broadcast(dt, y_to, y_from).shape
    dtb, yb, xb = (np.broadcast_to(a, shape).ravel() for a in (dt, y_to, y_from))
    if USE_NUMBA:
        out = logpdf_nb(dtb, yb, xb, *params.as_tuple())
    else:
        out = logpdf_np(dtb, yb, xb, *params.as_tuple())
    return float(out[0]) if shape == () else out.reshape(shape)


def transition_mean(dt, y_from, params: CirParams):
    """Conditional mean ``K - (K - y_from) exp(-dt lambda / K)``."""
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0.0):
        raise DomainError("dt must be nonnegative")
    _check_positive("y_from", y_from)
    y = np.asarray(y_from, dtype=float)
    # y + (K - y)(1 - e) is exact at dt = 0
    out = y - (params.capacity - y) * np.expm1(-dt * params.reversion_rate)
    return float(out) if np.ndim(out) == 0 else out


def transition_var(dt, y_from, params: CirParams):
    """Conditional variance of the size after ``dt``.

    ``y (sigma^2 K / lambda)(e - e^2) + (sigma^2 K^2 / (2 lambda))(1 - e)^2``
    with ``e = exp(-dt lambda / K)``.
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0.0):
        raise DomainError("dt must be nonnegative")
    y = _check_positive("y_from", y_from)
    lam, cap, sig = params.as_tuple()
    e = np.exp(-dt * params.reversion_rate)
    one_minus = -np.expm1(-dt * params.reversion_rate)
    out = (y * (sig * sig * cap / lam) * e * one_minus
           + (sig * sig * cap * cap / (2.0 * lam)) * one_minus ** 2)
    return float(out) if np.ndim(out) == 0 else out


def stationary_covariance(lag, params: CirParams):
    """Autocovariance of the stationary process at time lag ``lag``.

    ``(sigma^2 K^2 / (2 lambda)) exp(-lag lambda / K)``; the decay rate is the
    mean-reversion speed, consistent with :func:`transition_var`.
    """
    lag = np.abs(np.asarray(lag, dtype=float))
    lam, cap, sig = params.as_tuple()
    out = sig * sig * cap * cap / (2.0 * lam) * np.exp(-lag * params.reversion_rate)
    return float(out) if np.ndim(out) == 0 else out


def stationary_shape_scale(params: CirParams) -> GammaShapeScale:
    """Gamma shape ``2 lambda / sigma^2`` and scale ``sigma^2 K / (2 lambda)``."""
    params._require_noise()
    lam, cap, sig = params.as_tuple()
    return GammaShapeScale(shape=2.0 * lam / (sig * sig),
                           scale=sig * sig * cap / (2.0 * lam))


def stationary_log_pdf(y, params: CirParams):
    """Log density of the stationary Gamma law at ``y > 0``."""
    y = _check_positive("y", y)
    g = stationary_shape_scale(params)
    out = ((g.shape - 1.0) * np.log(y) - y / g.scale
           - math.lgamma(g.shape) - g.shape * math.log(g.scale))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_transition(rng: np.random.Generator, dt, y_from, params: CirParams,
                      size=None):
    """Exact draw of the size after ``dt`` via the Poisson-Gamma mixture.

    ``J ~ Poisson(u)``, ``G ~ Gamma(J + 2 lambda / sigma^2, 1)``, return ``G / a``.

    Parameters
    ----------
    rng : numpy.random.Generator
    dt, y_from : float or array_like
        Positive; broadcast together (and against ``size`` when given).
    params : CirParams
    size : int or tuple, optional

    Returns
    -------
    float or numpy.ndarray
    """
    dt = _check_positive("dt", dt)
    y_from = _check_positive("y_from", y_from)
    params._require_noise()
    lam, cap, sig = params.as_tuple()
    rate = lam / cap
    a = 2.0 * lam / (sig * sig * cap * -np.expm1(-rate * dt))
    u = a * y_from * np.exp(-rate * dt)
    if size is not None:
        a = np.broadcast_to(a, size)
        u = np.broadcast_to(u, size)
    jumps = rng.poisson(u)
    draws = rng.gamma(jumps + 2.0 * lam / (sig * sig)) / a
    return float(draws) if np.ndim(draws) == 0 else draws


def sample_stationary(rng: np.random.Generator, params: CirParams, size=None):
    """Draw from the stationary Gamma law."""
    g = stationary_shape_scale(params)
    out = rng.gamma(g.shape, g.scale, size=size)
    return float(out) if np.ndim(out) == 0 else out


@njit
def _euler_steps_nb(y, steps, normals, lam, cap, sig, truncate):
    """Advance one state through ``len(steps)`` Euler steps.

    ``normals`` supplies one standard normal per step.  Returns the internal
    state after the last step (which may be negative under truncation).
    """
    for j in range(steps.shape[0]):
        h = steps[j]
        pos = y if y > 0.0 else 0.0
        y = y + lam * (1.0 - pos / cap) * h + sig * math.sqrt(pos * h) * normals[j]
        if not truncate:
            y = abs(y)
    return y


@njit
def _euler_path_nb(y0, steps, normals, lam, cap, sig, truncate):
    n = steps.shape[0]
    out = np.empty(n + 1)
    out[0] = y0
    y = y0
    for j in range(n):
        h = steps[j]
        pos = y if y > 0.0 else 0.0
        y = y + lam * (1.0 - pos / cap) * h + sig * math.sqrt(pos * h) * normals[j]
        if not truncate:
            y = abs(y)
        out[j + 1] = y if y > 0.0 else 0.0
    return out


def _euler_path_np(y0, steps, normals, lam, cap, sig, truncate):
    out = np.empty(len(steps) + 1)
    out[0] = y0
    y = y0
    for j, h in enumerate(steps):
        pos = max(y, 0.0)
        y = y + lam * (1.0 - pos / cap) * h + sig * math.sqrt(pos * h) * normals[j]
        if not truncate:
            y = abs(y)
        out[j + 1] = max(y, 0.0)
    return out


def euler_grid(step: float, horizon: float) -> NDArray[np.float64]:
    """Step lengths covering ``[0, horizon]``: full steps then one remainder."""
    n = max(1, math.ceil(horizon / step - 1e-12))
    steps = np.full(n, step)
    steps[-1] = horizon - step * (n - 1)
    return steps


def euler_path(rng: np.random.Generator, y0: float, step: float, horizon: float,
               params: CirParams, scheme: str = "reflect") -> NDArray[np.float64]:
    """Euler-Maruyama path of the growth diffusion on ``[0, horizon]``.

    Parameters
    ----------
    rng : numpy.random.Generator
        Supplies one standard normal per step (drawn up front).
    y0 : float
        Initial size, positive.
    step : float
        Nominal step; the last step is shortened to land on ``horizon``.
    horizon : float
    params : CirParams
        ``diffusion == 0`` gives the deterministic growth curve.
    scheme : {"reflect", "truncate"}
        ``reflect`` replaces a negative value by its absolute value;
        ``truncate`` keeps the internal state signed, evaluates drift and
        noise at the positive part and reports the positive part.

    Returns
    -------
    numpy.ndarray
        Values at times ``0, step, 2 step, ..., horizon``; length
        ``ceil(horizon / step) + 1``.
    """
    y0 = float(_check_positive("y0", y0))
    step = float(_check_positive("step", step))
    horizon = float(_check_positive("horizon", horizon))
    if scheme not in ("reflect", "truncate"):
        raise DomainError(f"unknown Euler scheme {scheme!r}")
    steps = euler_grid(step, horizon)
    normals = rng.standard_normal(len(steps))
    kern = _euler_path_nb if USE_NUMBA else _euler_path_np
    return kern(y0, steps, normals, *params.as_tuple(), scheme == "truncate")
