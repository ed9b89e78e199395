"""Log-likelihoods of sampled trajectories and the stationary mark calculus.

Two regimes are supported.

nonstationary
    every individual starts at a known size ``m0`` at its (unobserved) birth.
    The mark part is a sum of transition log-densities over consecutive
    alive pairs (``l1``) plus, for each individual's first observation, the
    log of the transition density from ``m0`` averaged over a uniform birth
    time in the preceding sampling gap (``l2``).
stationary
    every observed size is treated as a draw from the stationary Gamma law;
    the mark part is stored in ``l1`` and ``l2`` is absent.

In both regimes ``l3`` is the log-likelihood of the count sequence.  The
parameter-free combinatorial constant of the full likelihood is never
computed, so all values are relative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

from . import cir, idproc
from ._backend import USE_NUMBA, njit
from .cir import CirParams
from .errors import DomainError
from .sgmodel import ModelParams, Trajectory, support_sets
from .specfun import _DEBYE, polygamma

__all__ = [
    "LambdaKnown",
    "SigmaKnown",
    "LogLikBreakdown",
    "MarkFisherBlock",
    "MarkData",
    "mark_data",
    "loglik_nonstationary",
    "loglik_stationary",
    "score_stationary",
    "hessian_stationary",
    "expected_info_marks",
    "c_theta",
    "mark_fisher_block",
    "log_moments",
    "gauss_legendre",
]


@dataclass(frozen=True)
class LambdaKnown:
    """The growth rate is known and held at ``value``."""

    value: float

    name = "lambda"


@dataclass(frozen=True)
class SigmaKnown:
    """The diffusion level is known and held at ``value``."""

    value: float

    name = "sigma"


Fixed = Union[LambdaKnown, SigmaKnown, None]


def _fixed_kind(fixed) -> str:
    if isinstance(fixed, (LambdaKnown, SigmaKnown)):
        return fixed.name
    if fixed in (LambdaKnown, "lambda"):
        return "lambda"
    if fixed in (SigmaKnown, "sigma"):
        return "sigma"
    raise DomainError(f"fixed must name 'lambda' or 'sigma', got {fixed!r}")


@dataclass(frozen=True)
class LogLikBreakdown:
    """Additive parts of a log-likelihood.

    ``l2`` is ``None`` in the stationary regime, where it has no counterpart.
    """

    l1: float
    l2: Optional[float]
    l3: float
    regime: str

    @property
    def total(self) -> float:
        return self.l1 + (self.l2 or 0.0) + self.l3

    @property
    def marks(self) -> float:
        """Mark part ``l1 + l2``."""
        return self.l1 + (self.l2 or 0.0)


@dataclass(frozen=True)
class MarkFisherBlock:
    """Diagonal information block for the two free mark parameters."""

    fixed: str
    matrix: NDArray[np.float64]
    c_theta: float

    @property
    def free_parameters(self):
        return ("capacity", "sigma") if self.fixed == "lambda" else ("lambda", "capacity")


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkData:
    """Flat arrays a likelihood evaluation needs, extracted once per trajectory.

    Transitions and first observations are listed row by row, so every sum
    runs in the same (row-major) order.
    """

    trans_dt: NDArray[np.float64]
    trans_to: NDArray[np.float64]
    trans_from: NDArray[np.float64]
    first_gap: NDArray[np.float64]
    first_size: NDArray[np.float64]
    n_obs: int
    sum_size: float
    sum_log_size: float
    sum_sq_size: float
    counts: NDArray[np.int64]
    deltas: NDArray[np.float64]
    area: float

    @property
    def n_transitions(self) -> int:
        return self.trans_dt.size

    @property
    def sample_var(self) -> float:
        """Population variance of all observed sizes (0 with < 2 sizes)."""
        if self.n_obs < 2:
            return 0.0
        mean = self.sum_size / self.n_obs
        return max(self.sum_sq_size / self.n_obs - mean * mean, 0.0)


STATIONARY_SUPPORTS = ("all", "exclude-first")


def mark_data(traj: Trajectory, support: str = "all") -> MarkData:
    """Extract transitions, first observations and summary statistics.

    Parameters
    ----------
    traj : Trajectory
    support : {"all", "exclude-first"}
        Which observed sizes enter the summary statistics ``n_obs``,
        ``sum_size``, ``sum_log_size`` and ``sum_sq_size`` used by the
        stationary likelihood.  ``"exclude-first"`` leaves out each
        individual's first observation, the one most affected by the size at
        birth.  Transitions and first observations are unaffected.
    """
    if support not in STATIONARY_SUPPORTS:
        raise DomainError(f"support must be one of {STATIONARY_SUPPORTS}, got {support!r}")
    sets = support_sets(traj)
    m = traj.sizes
    deltas = traj.grid.deltas
    alive = m > 0.0
    pair = alive[:, 1:] & alive[:, :-1]
    r, c = np.nonzero(pair)  # row-major order
    first_col = sets.first_index - 1
    rows = np.arange(traj.d)
    if support == "exclude-first":
        kept = alive.copy()
        kept[rows, first_col] = False
        pos = m[kept]
    else:
        pos = m[alive]
    return MarkData(
        trans_dt=np.ascontiguousarray(deltas[c + 1]),
        trans_to=np.ascontiguousarray(m[r, c + 1]),
        trans_from=np.ascontiguousarray(m[r, c]),
        first_gap=np.ascontiguousarray(deltas[first_col]),
        first_size=np.ascontiguousarray(m[rows, first_col]),
        n_obs=int(pos.size),
        sum_size=float(np.sum(pos)),
        sum_log_size=float(np.sum(np.log(pos))),
        sum_sq_size=float(np.sum(pos * pos)),
        counts=sets.counts,
        deltas=np.ascontiguousarray(deltas),
        area=traj.window.area,
    )


def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights on ``[-1, 1]``."""
    if int(n) != n or n < 1:
        raise DomainError(f"quadrature order must be a positive integer, got {n!r}")
    return np.polynomial.legendre.leggauss(int(n))


# ---------------------------------------------------------------------------
# birth-averaged first-observation term
# ---------------------------------------------------------------------------

_EPS_FRAC = 1e-8


@njit
def _birth_avg_nb(gaps, sizes, m0, lam, cap, sig, nodes, weights, coef):
    total = 0.0
    nq = nodes.shape[0]
    vals = np.empty(nq)
    for i in range(gaps.shape[0]):
        g = gaps[i]
        lo = 1e-8 * g
        half = 0.5 * (g - lo)
        mid = 0.5 * (g + lo)
        best = -np.inf
        for j in range(nq):
            t = mid + half * nodes[j]
            v = math.log(weights[j] * half) + cir._cir_logpdf_nb(t, sizes[i], m0, lam, cap, sig, coef)
            vals[j] = v
            if v > best:
                best = v
        acc = 0.0
        for j in range(nq):
            acc += math.exp(vals[j] - best)
        total += best + math.log(acc) - math.log(g)
    return total


def birth_avg_nb(gaps, sizes, m0, lam, cap, sig, nodes, weights) -> float:
    return _birth_avg_nb(gaps, sizes, float(m0), float(lam), float(cap), float(sig),
                         nodes, weights, _DEBYE)


def birth_avg_np(gaps, sizes, m0, lam, cap, sig, nodes, weights) -> float:
    if len(gaps) == 0:
        return 0.0
    gaps = np.asarray(gaps, dtype=float)[:, None]
    lo = _EPS_FRAC * gaps
    half = 0.5 * (gaps - lo)
    t = 0.5 * (gaps + lo) + half * nodes[None, :]
    y = np.broadcast_to(np.asarray(sizes, dtype=float)[:, None], t.shape)
    lp = cir.logpdf_np(t.ravel(), y.ravel(), np.full(t.size, float(m0)), lam, cap, sig)
    vals = np.log(weights[None, :] * half) + lp.reshape(t.shape)
    return float(np.sum(logsumexp(vals, axis=1) - np.log(gaps[:, 0])))


_birth_avg = birth_avg_nb if USE_NUMBA else birth_avg_np


def mark_loglik_nonstationary(data: MarkData, cp: CirParams, m0: float,
                              nodes, weights, drop_l2: bool = False):
    """``(l1, l2)`` of the nonstationary mark part on prepared data."""
    lam, cap, sig = cp.as_tuple()
    l1 = cir.logpdf_sum(data.trans_dt, data.trans_to, data.trans_from, lam, cap, sig) \
        if data.n_transitions else 0.0
    if drop_l2:
        return float(l1), 0.0
    l2 = _birth_avg(data.first_gap, data.first_size, m0, lam, cap, sig,
                    nodes, weights) if data.first_gap.size else 0.0
    return float(l1), float(l2)


def mark_loglik_stationary(data: MarkData, cp: CirParams) -> float:
    """Sum of stationary Gamma log-densities over every observed size."""
    if data.n_obs == 0:
        return 0.0
    g = cir.stationary_shape_scale(cp)
    return ((g.shape - 1.0) * data.sum_log_size - data.sum_size / g.scale
            - data.n_obs * (math.lgamma(g.shape) + g.shape * math.log(g.scale)))


def count_loglik(data: MarkData, alpha: float, mu: float) -> float:
    """Count-sequence log-likelihood with arrival rate ``alpha * area``."""
    return idproc.count_log_lik(data.counts, data.deltas,
                                idproc.IdParams(alpha * data.area, mu))


def loglik_nonstationary(traj: Trajectory, params: ModelParams, m0: float,
                         quad_nodes: int = 32, drop_l2: bool = False) -> LogLikBreakdown:
    """Log-likelihood when all individuals are born at size ``m0``.

    Parameters
    ----------
    traj : Trajectory
    params : ModelParams
    m0 : float
        Known size at birth.
    quad_nodes : int
        Gauss-Legendre order for the birth-time average, at least 8.
    drop_l2 : bool
        Replace the first-observation term by zero.

    Returns
    -------
    LogLikBreakdown
    """
    if not (math.isfinite(m0) and m0 > 0.0):
        raise DomainError(f"m0 must be positive, got {m0!r}")
    if int(quad_nodes) != quad_nodes or quad_nodes < 8:
        raise DomainError(f"quad_nodes must be an integer >= 8, got {quad_nodes!r}")
    data = mark_data(traj)
    nodes, weights = gauss_legendre(quad_nodes)
    l1, l2 = mark_loglik_nonstationary(data, params.cir, m0, nodes, weights, drop_l2)
    l3 = count_loglik(data, params.alpha, params.mu)
    return LogLikBreakdown(l1=l1, l2=l2, l3=l3, regime="nonstationary")


def loglik_stationary(traj: Trajectory, params: ModelParams,
                      support: str = "all") -> LogLikBreakdown:
    """Log-likelihood treating every observed size as stationary.

    ``support="exclude-first"`` restricts the mark term to observations after
    each individual's first one (see :func:`mark_data`).
    """
    data = mark_data(traj, support)
    l1 = mark_loglik_stationary(data, params.cir)
    l3 = count_loglik(data, params.alpha, params.mu)
    return LogLikBreakdown(l1=float(l1), l2=None, l3=l3, regime="stationary")


# ---------------------------------------------------------------------------
# stationary mark calculus
# ---------------------------------------------------------------------------

def _z(z):
    za = np.asarray(z, dtype=float)
    if not (np.all(np.isfinite(za)) and np.all(za > 0.0)):
        raise DomainError("z must be positive and finite")
    return za


def score_stationary(z, params: CirParams) -> NDArray[np.float64]:
    """Gradient of ``log pi(z)`` w.r.t. (growth_rate, capacity, diffusion).

    Returns
    -------
    ndarray
        Shape ``(3,)`` for scalar ``z``, else ``(3,) + z.shape``.
    """
    z = _z(z)
    lam, cap, sig = params.as_tuple()
    s2 = sig * sig
    b = 2.0 * lam / s2
    dig = polygamma(0, b)
    lkl = math.log(cap * s2 / lam)
    d_lam = (np.log(z) - z / cap + 1.0 + math.log(2.0) - lkl - dig) / (s2 / 2.0)
    d_cap = 2.0 * lam * (z - cap) / (s2 * cap * cap)
    d_sig = (z / cap - np.log(z) - math.log(2.0) - 1.0 + lkl + dig) / (sig ** 3 / (4.0 * lam))
    return np.array([d_lam, d_cap, d_sig])


def hessian_stationary(z, params: CirParams) -> NDArray[np.float64]:
    """Matrix of second derivatives of ``log pi(z)``; symmetric by construction."""
    z = _z(z)
    lam, cap, sig = params.as_tuple()
    s2 = sig * sig
    b = 2.0 * lam / s2
    dig = polygamma(0, b)
    tri = polygamma(1, b)
    lz = np.log(z)
    lsk = math.log(s2 * cap / lam)
    ll = np.full_like(z, (2.0 / (lam * s2 * s2)) * (s2 - 2.0 * lam * tri))
    lk = 2.0 * (z - cap) / (s2 * cap * cap)
    ls = (z / cap - lz - 2.0 - math.log(2.0) + lsk + dig + b * tri) / (sig ** 3 / 4.0)
    kk = 2.0 * lam * (cap - 2.0 * z) / (s2 * cap ** 3)
    ks = 4.0 * lam * (cap - z) / (sig ** 3 * cap * cap)
    ss = ((-z / cap + lz + (5.0 + math.log(8.0)) / 3.0 - lsk - dig
           - (4.0 * lam / (3.0 * s2)) * tri) / (sig ** 4 / (12.0 * lam)))
    return np.array([[ll, lk, ls], [lk, kk, ks], [ls, ks, ss]])


def c_theta(params: CirParams) -> float:
    """``beta * trigamma(beta) - 1`` with ``beta = 2 lambda / sigma^2``; always positive."""
    b = params.shape
    return float(b * polygamma(1, b) - 1.0)


def expected_info_marks(params: CirParams) -> NDArray[np.float64]:
    """Expected information of one stationary size; singular by construction."""
    lam, cap, sig = params.as_tuple()
    c = c_theta(params)
    s2 = sig * sig
    return (2.0 * c / s2) * np.array([
        [1.0 / lam, 0.0, -2.0 / sig],
        [0.0, (lam / cap ** 2) / c, 0.0],
        [-2.0 / sig, 0.0, 4.0 * lam / s2],
    ])


def mark_fisher_block(params: CirParams, alpha_over_mu: float, fixed) -> MarkFisherBlock:
    """Information block of the two free mark parameters.

    Parameters
    ----------
    params : CirParams
    alpha_over_mu : float
        Expected number of individuals alive at a sampling time.
    fixed : LambdaKnown, SigmaKnown, or the strings "lambda" / "sigma"
        Which parameter is held known.
    """
    kind = _fixed_kind(fixed)
    if not alpha_over_mu > 0.0:
        raise DomainError("alpha_over_mu must be positive")
    lam, cap, sig = params.as_tuple()
    c = c_theta(params)
    s2 = sig * sig
    cap_entry = 2.0 * lam / (cap * cap * s2)
    if kind == "lambda":
        diag = [cap_entry, 8.0 * lam * c / (s2 * s2)]
    else:
        diag = [2.0 * c / (lam * s2), cap_entry]
    return MarkFisherBlock(fixed=kind, matrix=alpha_over_mu * np.diag(diag), c_theta=c)


def log_moments(params: CirParams) -> dict:
    """Closed-form moments of a stationary size ``Z``.

    Returns
    -------
    dict
        Keys ``E_logZ``, ``E_logZ2``, ``E_logZ4`` and ``E_Z4``.
    """
    lam, cap, sig = params.as_tuple()
    s2 = sig * sig
    b = 2.0 * lam / s2
    p0, p1, p2, p3 = (polygamma(k, b) for k in range(4))
    big = math.log(2.0 * lam / (cap * s2))
    small = math.log(lam / (cap * s2))
    l2 = math.log(2.0)
    e_log = math.log(cap * s2 / (2.0 * lam)) + p0
    e_log2 = big ** 2 - 2.0 * big * p0 + p0 ** 2 + p1
    e_log4 = (l2 ** 4 + 4.0 * l2 ** 3 * small + 6.0 * l2 ** 2 * small ** 2
              + math.log(16.0) * small ** 3 + small ** 4
              - 4.0 * big * p0 ** 3 + p0 ** 4 + 6.0 * big ** 2 * p1 + 3.0 * p1 ** 2
              + 6.0 * p0 ** 2 * (big ** 2 + p1)
              - 4.0 * p0 * (big ** 3 + (math.log(8.0) + 3.0 * small) * p1 - p2)
              - 4.0 * l2 * p2 - 4.0 * small * p2 + p3)
    e_z4 = cap ** 4 * (lam + s2) * (2.0 * lam + s2) * (2.0 * lam + 3.0 * s2) / (4.0 * lam ** 3)
    return {"E_logZ": e_log, "E_logZ2": e_log2, "E_logZ4": e_log4, "E_Z4": e_z4}
