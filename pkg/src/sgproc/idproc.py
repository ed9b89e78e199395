"""Population-count kernel of the immigration-death (M/M/infinity) process.

Arrivals come at a constant rate and every individual dies after an
exponential lifetime.  Given ``x`` individuals now, the count after time
``t`` is the sum of a Binomial(x, exp(-mu t)) number of survivors and an
independent Poisson number of newcomers still alive, so the transition pmf
is a Poisson-Binomial convolution.  All sums are taken in log domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import stats
from scipy.special import gammaln, logsumexp

from ._backend import USE_NUMBA, njit
from .errors import ConvergenceError, DomainError

__all__ = [
    "IdParams",
    "IdTransitionTerms",
    "FisherInfoId",
    "transition_terms",
    "transition_log_pmf",
    "stationary_log_pmf",
    "conditional_moments",
    "count_log_lik",
    "xi_constant",
    "fisher_info",
    "validity_condition",
]


@dataclass(frozen=True)
class IdParams:
    """Arrival rate (whole window, events per time) and per-capita death rate."""

    arrival_rate: float
    death_rate: float

    def __post_init__(self):
        for name in ("arrival_rate", "death_rate"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {val!r}")
            object.__setattr__(self, name, val)

    @property
    def stationary_mean(self) -> float:
        return self.arrival_rate / self.death_rate


@dataclass(frozen=True)
class IdTransitionTerms:
    """Poisson mean of surviving newcomers and the individual survival probability."""

    rho: float
    survive: float


def transition_terms(t: float, params: IdParams) -> IdTransitionTerms:
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t!r}")
    die = -math.expm1(-params.death_rate * t)
    return IdTransitionTerms(rho=params.arrival_rate * die / params.death_rate,
                             survive=math.exp(-params.death_rate * t))


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit
def _id_logpmf_nb(t, y, x, arrival, mu):
    mt = mu * t
    log_die = math.log(-math.expm1(-mt))
    rho = arrival * math.exp(log_die) / mu
    log_rho = math.log(rho)
    lgx = math.lgamma(x + 1.0)
    # k survivors and y - k newcomers, k = 0 .. min(x, y)
    n = (x if x < y else y) + 1
    best = -np.inf
    terms = np.empty(n)
    for idx in range(n):
        k = idx
        j = y - k
        val = (j * log_rho - rho - math.lgamma(j + 1.0)
               + lgx - math.lgamma(k + 1.0) - math.lgamma(x - k + 1.0)
               - k * mt + (x - k) * log_die)
        terms[idx] = val
        if val > best:
            best = val
    acc = 0.0
    for idx in range(n):
        acc += math.exp(terms[idx] - best)
    return best + math.log(acc)


@njit
def _count_loglik_nb(counts, deltas, arrival, mu):
    total = 0.0
    for k in range(deltas.shape[0]):
        total += _id_logpmf_nb(deltas[k], counts[k + 1], counts[k], arrival, mu)
    return total


def _id_logpmf_np(t, y, x, arrival, mu):
    mt = mu * t
    log_die = math.log(-math.expm1(-mt))
    rho = arrival * math.exp(log_die) / mu
    k = np.arange(min(x, y) + 1, dtype=float)
    j = y - k
    vals = (j * math.log(rho) - rho - gammaln(j + 1.0)
            + gammaln(x + 1.0) - gammaln(k + 1.0) - gammaln(x - k + 1.0)
            - k * mt + (x - k) * log_die)
    return float(logsumexp(vals))


def count_loglik_nb(counts, deltas, arrival, mu) -> float:
    return _count_loglik_nb(np.ascontiguousarray(counts, dtype=np.int64),
                            np.ascontiguousarray(deltas, dtype=float),
                            float(arrival), float(mu))


def count_loglik_np(counts, deltas, arrival, mu) -> float:
    counts = np.asarray(counts, dtype=np.int64)
    return float(sum(_id_logpmf_np(float(d), int(counts[k + 1]), int(counts[k]),
                                   arrival, mu)
                     for k, d in enumerate(np.asarray(deltas, dtype=float))))


_count_loglik = count_loglik_nb if USE_NUMBA else count_loglik_np


def _check_count(name, n):
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise DomainError(f"{name} must be a nonnegative integer, got {n!r}")
    return int(n)


def transition_log_pmf(t: float, y: int, x: int, params: IdParams) -> float:
    """Log probability of ``y`` individuals after time ``t`` given ``x`` now.

    Parameters
    ----------
    t : float
        Elapsed time, positive.
    y, x : int
        Target and current counts.
    params : IdParams

    Returns
    -------
    float
    """
    if not (t > 0.0 and math.isfinite(t)):
        raise DomainError(f"t must be positive and finite, got {t!r}")
    y = _check_count("y", y)
    x = _check_count("x", x)
    if USE_NUMBA:
        return float(_id_logpmf_nb(float(t), y, x, params.arrival_rate, params.death_rate))
    return _id_logpmf_np(float(t), y, x, params.arrival_rate, params.death_rate)


def stationary_log_pmf(n, params: IdParams):
    """Poisson(arrival_rate / death_rate) log pmf."""
    out = stats.poisson.logpmf(n, params.stationary_mean)
    return float(out) if np.ndim(out) == 0 else out


def conditional_moments(t: float, x: int, params: IdParams):
    """Mean and second moment of the count after ``t`` given ``x`` now.

    Returns
    -------
    (float, float)
        ``x e + rho`` and ``x (x - 1) e^2 + (1 + 2 rho) x e + rho^2 + rho``
        with ``e = exp(-mu t)``.
    """
    x = _check_count("x", x)
    tt = transition_terms(t, params)
    e, rho = tt.survive, tt.rho
    mean = x * e + rho
    second = x * (x - 1) * e * e + (1.0 + 2.0 * rho) * x * e + rho * rho + rho
    return mean, second


def count_log_lik(counts, deltas, params: IdParams) -> float:
    """Sum of log transition probabilities along an observed count sequence.

    Parameters
    ----------
    counts : sequence of int
        ``n + 1`` counts, starting with the count at time zero.
    deltas : sequence of float
        ``n`` positive gaps between consecutive sampling times.
    params : IdParams
    """
    counts = np.asarray(counts)
    deltas = np.asarray(deltas, dtype=float)
    if counts.ndim != 1 or deltas.ndim != 1 or len(counts) != len(deltas) + 1:
        raise DomainError(
            f"need len(counts) == len(deltas) + 1, got {len(counts)} and {len(deltas)}")
    if counts.size and (np.any(counts < 0) or np.any(counts != np.round(counts))):
        raise DomainError("counts must be nonnegative integers")
    if deltas.size and not (np.all(deltas > 0.0) and np.all(np.isfinite(deltas))):
        raise DomainError("deltas must be positive and finite")
    if deltas.size == 0:
        return 0.0
    return float(_count_loglik(counts.astype(np.int64), deltas,
                               params.arrival_rate, params.death_rate))


# ---------------------------------------------------------------------------
# Fisher information
# ---------------------------------------------------------------------------

_MAX_STATES = 1_000_000


def _log_pmf_rows(delta, params, i_values, j_max):
    """Log transition pmf rows ``log p(delta, j | i)`` for ``j = 0..j_max``."""
    tt = transition_terms(delta, params)
    log_pois = stats.poisson.logpmf(np.arange(j_max + 1), tt.rho)
    rows = np.full((len(i_values), j_max + 1), -np.inf)
    for r, i in enumerate(i_values):
        log_binom = stats.binom.logpmf(np.arange(i + 1), i, tt.survive)
        # rows[r, j] = logsumexp_k log_binom[k] + log_pois[j - k]
        k = np.arange(min(i, j_max) + 1)
        jj = np.arange(j_max + 1)
        lag = jj[:, None] - k[None, :]
        vals = np.where(lag >= 0, log_binom[k][None, :] + log_pois[np.clip(lag, 0, None)],
                        -np.inf)
        rows[r] = logsumexp(vals, axis=1)
    return rows


def xi_constant(params: IdParams, delta: float, tail_tol: float = 1e-12) -> float:
    """Score-variance constant of the count chain.

    ``Xi = sum_i pi(i) sum_{j >= 1} p(delta, j - 1 | i)**2 / p(delta, j | i)``,
    truncated where the neglected stationary mass and the neglected inner
    tails each stay below ``tail_tol``.

    Parameters
    ----------
    params : IdParams
    delta : float
        Sampling interval, positive.
    tail_tol : float
        Truncation tolerance in ``(0, 1e-4]``.
    """
    if not (0.0 < tail_tol <= 1e-4):
        raise DomainError(f"tail_tol must lie in (0, 1e-4], got {tail_tol!r}")
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    mean = params.stationary_mean
    i_lo = int(stats.poisson.ppf(tail_tol / 2.0, mean))
    i_hi = int(stats.poisson.isf(tail_tol / 2.0, mean)) + 1
    tt = transition_terms(delta, params)
    # the count after delta is stochastically below i_hi + Poisson(rho)
    j_max = i_hi + int(stats.poisson.isf(tail_tol * 1e-3, tt.rho)) + 10
    if (i_hi - i_lo + 1) * (j_max + 1) > _MAX_STATES:
        raise ConvergenceError(
            f"Xi truncation needs {(i_hi - i_lo + 1) * (j_max + 1)} states, above {_MAX_STATES}")
    i_values = np.arange(i_lo, i_hi + 1)
    rows = _log_pmf_rows(delta, params, i_values, j_max)
    with np.errstate(invalid="ignore"):
        log_terms = 2.0 * rows[:, :-1] - rows[:, 1:]
    log_terms = np.where(np.isfinite(log_terms), log_terms, -np.inf)
    inner = np.exp(logsumexp(log_terms, axis=1))
    weights = np.exp(stats.poisson.logpmf(i_values, mean))
    return float(np.sum(weights * inner))


def validity_condition(arrival_rate: float, death_rate: float, delta: float):
    """Sampling-interval condition of the asymptotic normality result.

    Returns
    -------
    (float, bool)
        ``(log(alpha + mu) - log(alpha)) / mu`` and whether it is ``>= 2 delta``.
    """
    value = math.log1p(death_rate / arrival_rate) / death_rate
    return value, bool(value >= 2.0 * delta)


@dataclass
class FisherInfoId:
    """Fisher information of one step of the sampled count chain.

    Attributes
    ----------
    xi, tau0, rho0 : float
        Scalar ingredients.
    matrix : ndarray (2, 2)
        Information for (arrival rate, death rate).
    inverse : ndarray (2, 2)
        Closed-form inverse.
    numeric_inverse : ndarray (2, 2)
        ``numpy.linalg.inv(matrix)``.
    residual : float
        ``max |matrix @ inverse - I|``.
    """

    xi: float
    tau0: float
    rho0: float
    matrix: NDArray[np.float64]
    inverse: NDArray[np.float64]
    numeric_inverse: NDArray[np.float64]
    residual: float
    notes: list = field(default_factory=list)

    @property
    def authoritative_inverse(self) -> NDArray[np.float64]:
        """Closed form when it checks out to 1e-6, otherwise the numeric inverse."""
        return self.inverse if self.residual < 1e-6 else self.numeric_inverse


def fisher_info(params: IdParams, delta: float, tail_tol: float = 1e-12) -> FisherInfoId:
    """Information matrix of the count chain sampled every ``delta``.

    The (2, 2) entry contains the product of death rate and the sampling
    interval where the printed form carries an undefined time symbol; the
    closed-form inverse confirms this reading (see ``residual``).
    """
    xi = xi_constant(params, delta, tail_tol)
    a, mu = params.arrival_rate, params.death_rate
    md = mu * delta
    e = math.exp(-md)
    one_e = -math.expm1(-md)
    rho = a * one_e / mu
    tau = one_e - md * e
    x1 = xi - 1.0
    i11 = x1 * rho ** 2 / a ** 2
    i12 = (x1 * rho * (md - tau) - md) / mu ** 2
    i22 = (a ** 2 * md * (2.0 * tau - md) / (rho * mu ** 4)
           + a ** 2 * delta ** 2 * e / (mu ** 2 * rho)
           + x1 * a ** 2 * (tau - md) ** 2 / mu ** 4)
    matrix = np.array([[i11, i12], [i12, i22]])
    pref = mu / (delta * ((1.0 + e) * rho * x1 - 1.0))
    off = 1.0 + rho * x1 * (tau - md) / md
    inverse = pref * np.array([
        [(rho * (2.0 * tau - md * one_e) + rho ** 2 / md * x1 * (tau - md) ** 2) / one_e ** 2, off],
        [off, x1 * one_e ** 2 / md],
    ])
    numeric = np.linalg.inv(matrix)
    residual = float(np.max(np.abs(matrix @ inverse - np.eye(2))))
    notes = []
    if residual >= 1e-6:
        notes.append(f"closed-form inverse residual {residual:.3e}; numeric inverse used")
    return FisherInfoId(xi=xi, tau0=tau, rho0=rho, matrix=matrix, inverse=inverse,
                        numeric_inverse=numeric, residual=residual, notes=notes)
