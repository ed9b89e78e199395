"""Maximum-likelihood fitting.

The log-likelihood separates into a mark part, depending on
(growth_rate, capacity, diffusion), and a count part, depending on
(alpha, mu), so the two groups are fitted independently and concatenated.

Mark parameters are searched in the coordinates
``(log(2 lambda - sigma^2), log K, log sigma)``, which make the positivity
constraint ``2 lambda >= sigma^2`` structural.  Count parameters are searched
in ``(log alpha, log mu)``.  Every search is a Nelder-Mead simplex inside a
box on the natural parameters; points outside the box score ``+inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from . import idproc
from .cir import CirParams
from .errors import DomainError, FitError
from .likelihood import (STATIONARY_SUPPORTS, LambdaKnown, LogLikBreakdown, MarkData, SigmaKnown,
                         c_theta, count_loglik, gauss_legendre, mark_data,
                         mark_fisher_block, mark_loglik_nonstationary,
                         mark_loglik_stationary, _fixed_kind)
from .sgmodel import ModelParams, Trajectory
from .specfun import polygamma

__all__ = [
    "DEFAULT_BOUNDS",
    "FitOptions",
    "FitResult",
    "SimplexResult",
    "IdFit",
    "MarkFit",
    "StationaryMarkFit",
    "nelder_mead",
    "gamma_mle",
    "fit_id",
    "fit_marks_nonstationary",
    "fit_marks_stationary",
    "fit_full",
    "asymptotic_cov",
    "cov_parameter_names",
    "LambdaKnown",
    "SigmaKnown",
]

DEFAULT_BOUNDS = {
    "lambda": (1e-3, 50.0),
    "capacity": (1e-3, 100.0),
    "sigma": (1e-3, 5.0),
    "alpha": (1e-6, 100.0),
    "mu": (1e-6, 10.0),
}

_BOUND_REL = 1e-3


@dataclass(frozen=True)
class FitOptions:
    """Settings shared by all fits.

    Attributes
    ----------
    regime : {"nonstationary", "stationary"}
    m0 : float, optional
        Size at birth; required for nonstationary mark fits.
    fixed : LambdaKnown, SigmaKnown or None
        Mark parameter held known.
    bounds : dict, optional
        Overrides for :data:`DEFAULT_BOUNDS`, keyed by parameter name.
    tol : float
        Simplex stops when its function-value spread falls below ``tol``.
    max_iter : int
        Iteration cap per simplex run.
    quad_nodes : int
        Gauss-Legendre order of the birth-time average.
    drop_l2 : bool
        Fit the nonstationary marks on transitions only.
    restarts : int
        Additional jittered simplex runs after the first.
    seed : int
        Seed of the jitter generator.
    init : dict, optional
        Starting values, keyed like :data:`DEFAULT_BOUNDS`; missing keys use
        the data-driven defaults (growth rate 1.0).
    init_step : float
        Initial simplex edge in the search coordinates.
    stationary_support : {"all", "exclude-first"}
        Observed sizes entering the stationary mark likelihood.
    """

    regime: str = "nonstationary"
    m0: Optional[float] = None
    fixed: object = None
    bounds: Optional[dict] = None
    tol: float = 1e-8
    max_iter: int = 4000
    quad_nodes: int = 32
    drop_l2: bool = False
    restarts: int = 3
    seed: int = 0
    init: Optional[dict] = None
    init_step: float = 0.1
    stationary_support: str = "all"

    def __post_init__(self):
        if self.regime not in ("nonstationary", "stationary"):
            raise DomainError(f"unknown regime {self.regime!r}")
        if self.stationary_support not in STATIONARY_SUPPORTS:
            raise DomainError(f"unknown stationary support {self.stationary_support!r}")
        if not self.tol > 0.0:
            raise DomainError("tol must be positive")
        if self.fixed is not None and not isinstance(self.fixed, (LambdaKnown, SigmaKnown)):
            raise DomainError("fixed must be LambdaKnown(value), SigmaKnown(value) or None")
        box = self.box()
        for name, (lo, hi) in box.items():
            if not (0.0 < lo < hi):
                raise DomainError(f"bounds for {name} must satisfy 0 < low < high")
        if box["sigma"][0] ** 2 > 2.0 * box["lambda"][1]:
            raise DomainError("bounds leave no point with 2*lambda >= sigma**2")

    def box(self) -> dict:
        out = dict(DEFAULT_BOUNDS)
        if self.bounds:
            unknown = set(self.bounds) - set(out)
            if unknown:
                raise DomainError(f"unknown bound names {sorted(unknown)}")
            out.update({k: (float(v[0]), float(v[1])) for k, v in self.bounds.items()})
        return out


@dataclass
class SimplexResult:
    """Outcome of one simplex search; unpacks as (x, value, iterations, converged)."""

    x: NDArray[np.float64]
    value: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.x, self.value, self.iterations, self.converged))


def _default_simplex(x0, step):
    x0 = np.asarray(x0, dtype=float)
    p = x0.size
    sim = np.tile(x0, (p + 1, 1))
    for i in range(p):
        if step is None:
            sim[i + 1, i] = x0[i] * 1.05 if x0[i] != 0.0 else 0.00025
        else:
            sim[i + 1, i] = x0[i] + step[i]
    return sim


def nelder_mead(objective: Callable, x0, tol: float = 1e-8, max_iter: int = 4000,
                step=None, initial_simplex=None) -> SimplexResult:
    """Minimise ``objective`` with the Nelder-Mead simplex method.

    Reflection 1, expansion 2, contraction 0.5 and shrink 0.5 (scipy's
    non-adaptive coefficients).  The search stops when the spread of
    function values over the simplex drops below ``tol`` and the vertices lie
    within ``sqrt(tol)`` of the best one along every axis.  The second test
    stops a symmetric simplex straddling the minimum (equal function values
    at distinct points) from passing as converged.

    Parameters
    ----------
    objective : callable
        Maps a 1-d array to a float; ``+inf`` marks infeasible points.
    x0 : array_like
        Start; the objective must be finite there.
    tol : float
    max_iter : int
    step : array_like, optional
        Edge lengths of the initial simplex along each axis.
    initial_simplex : array_like, optional
        Explicit ``(p + 1, p)`` simplex; overrides ``step``.

    Returns
    -------
    SimplexResult
        ``history`` holds the best objective value after every iteration.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    f0 = float(objective(x0))
    if not math.isfinite(f0):
        raise FitError(f"objective is not finite at the starting point ({f0!r})")
    if initial_simplex is None:
        initial_simplex = _default_simplex(
            x0, None if step is None else np.broadcast_to(np.asarray(step, float), x0.shape))
    history = []

    def callback(intermediate_result):
        history.append(float(intermediate_result.fun))

    res = minimize(objective, x0, method="Nelder-Mead", callback=callback,
                   options={"xatol": math.sqrt(tol), "fatol": tol, "maxiter": int(max_iter),
                            "maxfev": 50 * int(max_iter) + 100,
                            "initial_simplex": initial_simplex, "adaptive": False})
    return SimplexResult(x=np.asarray(res.x, dtype=float), value=float(res.fun),
                         iterations=int(res.nit), converged=bool(res.status == 0),
                         history=history)


def _multistart(objective, x0, opts: FitOptions, notes: list) -> SimplexResult:
    """First run from ``x0``, then ``opts.restarts`` jittered runs from the best point."""
    rng = np.random.default_rng(opts.seed)
    p = np.size(x0)
    best = nelder_mead(objective, x0, opts.tol, opts.max_iter, step=np.full(p, opts.init_step))
    values = [best.value]
    total_iter = best.iterations
    for _ in range(opts.restarts):
        jitter = opts.init_step * rng.uniform(0.5, 1.5, p) * rng.choice([-1.0, 1.0], p)
        run = nelder_mead(objective, best.x, opts.tol, opts.max_iter, step=jitter)
        total_iter += run.iterations
        values.append(run.value)
        if run.value < best.value:
            history = best.history + [min(best.value, h) for h in run.history]
            best = replace(run, history=history)
        else:
            best.history.extend(min(best.value, h) for h in run.history)
    if max(values) - min(values) > opts.tol:
        notes.append("simplex restarts disagreed by %.3g in objective; best kept"
                     % (max(values) - min(values)))
    return replace(best, iterations=total_iter)


def _boundary_notes(values: dict, box: dict, notes: list):
    for name, val in values.items():
        lo, hi = box[name]
        if abs(val - lo) <= _BOUND_REL * lo or abs(val - hi) <= _BOUND_REL * hi or \
                val <= lo or val >= hi:
            notes.append(f"{name} estimate {val!r} at search bound")


# ---------------------------------------------------------------------------
# count parameters
# ---------------------------------------------------------------------------

@dataclass
class IdFit:
    """Fitted arrival intensity (per unit area) and death rate."""

    alpha_hat: float
    mu_hat: float
    loglik: float
    iterations: int
    converged: bool
    notes: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.alpha_hat, self.mu_hat))


def _moment_start(counts, deltas):
    counts = np.asarray(counts, dtype=float)
    dbar = float(np.mean(deltas))
    prev, nxt = counts[:-1], counts[1:]
    if np.var(prev) > 0.0:
        slope, icept = np.polyfit(prev, nxt, 1)
    else:
        slope, icept = math.exp(-0.1), max(float(np.mean(nxt)) * (1 - math.exp(-0.1)), 0.01)
    slope = min(max(slope, 1e-3), 1.0 - 1e-6)
    mu = -math.log(slope) / dbar
    arrival = max(icept, 1e-3) * mu / (1.0 - slope)
    return arrival, mu


def fit_id(counts, deltas, opts: FitOptions = FitOptions(), area: float = 1.0) -> IdFit:
    """Maximise the count log-likelihood over (alpha, mu).

    Parameters
    ----------
    counts : sequence of int
        ``n + 1`` counts starting at time zero.
    deltas : sequence of float
        ``n`` sampling gaps.
    opts : FitOptions
    area : float
        Window area; the arrival rate is ``alpha * area``.

    Returns
    -------
    IdFit
    """
    counts = np.asarray(counts, dtype=np.int64)
    deltas = np.asarray(deltas, dtype=float)
    if len(counts) != len(deltas) + 1:
        raise FitError("need len(counts) == len(deltas) + 1")
    if len(deltas) < 2:
        raise FitError("fitting the count chain needs at least two transitions")
    box = opts.box()
    notes: list = []
    lo_a, hi_a = box["alpha"]
    lo_m, hi_m = box["mu"]

    def objective(w):
        alpha, mu = math.exp(w[0]), math.exp(w[1])
        if not (lo_a <= alpha <= hi_a and lo_m <= mu <= hi_m):
            return np.inf
        return -idproc.count_log_lik(counts, deltas, idproc.IdParams(alpha * area, mu))

    init = opts.init or {}
    arrival0, mu0 = _moment_start(counts, deltas)
    alpha0 = float(init.get("alpha", arrival0 / area))
    mu0 = float(init.get("mu", mu0))
    alpha0 = min(max(alpha0, lo_a * 1.01), hi_a / 1.01)
    mu0 = min(max(mu0, lo_m * 1.01), hi_m / 1.01)
    if np.all(counts == 0):
        notes.append("all counts are zero; alpha is driven to its lower bound")
    elif np.all(counts[1:] == counts[1]):
        notes.append("counts are constant after the first step; "
                     "the likelihood is flat along some directions")
    res = _multistart(objective, np.log([alpha0, mu0]), opts, notes)
    alpha, mu = (float(v) for v in np.exp(res.x))
    _boundary_notes({"alpha": alpha, "mu": mu}, box, notes)
    return IdFit(alpha_hat=alpha, mu_hat=mu, loglik=-res.value,
                 iterations=res.iterations, converged=res.converged, notes=notes)


# ---------------------------------------------------------------------------
# mark parameters
# ---------------------------------------------------------------------------

@dataclass
class MarkFit:
    """Fitted (growth_rate, capacity, diffusion) with diagnostics."""

    lambda_hat: float
    k_hat: float
    sigma_hat: float
    loglik: float
    iterations: int
    converged: bool
    notes: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.lambda_hat, self.k_hat, self.sigma_hat))

    @property
    def cir(self) -> CirParams:
        return CirParams(self.lambda_hat, self.k_hat, self.sigma_hat)


@dataclass
class StationaryMarkFit(MarkFit):
    """Stationary mark fit, carrying the Gamma shape/scale estimates as well."""

    shape_hat: float = math.nan
    scale_hat: float = math.nan

    def __iter__(self):
        return iter((self.lambda_hat, self.k_hat, self.sigma_hat,
                     self.shape_hat, self.scale_hat))


class _MarkCoords:
    """Map between natural mark parameters and unconstrained search coordinates."""

    def __init__(self, fixed, box):
        self.kind = None if fixed is None else _fixed_kind(fixed)
        self.value = None if fixed is None else float(fixed.value)
        self.box = box

    def to_natural(self, w):
        if self.kind is None:
            sig = math.exp(w[2])
            return 0.5 * (math.exp(w[0]) + sig * sig), math.exp(w[1]), sig
        if self.kind == "lambda":
            return self.value, math.exp(w[0]), math.exp(w[1])
        sig = self.value
        return 0.5 * (math.exp(w[0]) + sig * sig), math.exp(w[1]), sig

    def to_search(self, lam, cap, sig):
        if self.kind is None:
            return np.array([math.log(2.0 * lam - sig * sig), math.log(cap), math.log(sig)])
        if self.kind == "lambda":
            return np.array([math.log(cap), math.log(sig)])
        return np.array([math.log(2.0 * lam - sig * sig), math.log(cap)])

    def feasible(self, lam, cap, sig) -> bool:
        b = self.box
        return (b["lambda"][0] <= lam <= b["lambda"][1] and b["capacity"][0] <= cap <= b["capacity"][1]
                and b["sigma"][0] <= sig <= b["sigma"][1] and 2.0 * lam >= sig * sig)

    def start(self, data: MarkData, init: Optional[dict]):
        """Data-driven start: capacity from the mean, sigma from the variance."""
        init = init or {}
        if data.n_obs == 0:
            raise FitError("no observed sizes")
        mean = data.sum_size / data.n_obs
        lam = float(init.get("lambda", 1.0)) if self.kind != "lambda" else self.value
        cap = float(init.get("capacity", mean))
        if self.kind == "sigma":
            sig = self.value
        elif "sigma" in init:
            sig = float(init["sigma"])
        else:
            var = data.sample_var
            sig = math.sqrt(max(2.0 * lam * var / (cap * cap), 1e-12))
        b = self.box
        if self.kind != "lambda":
            lam = min(max(lam, b["lambda"][0] * 1.01), b["lambda"][1] / 1.01)
        cap = min(max(cap, b["capacity"][0] * 1.01), b["capacity"][1] / 1.01)
        if self.kind != "sigma":
            sig = min(max(sig, b["sigma"][0] * 1.01), b["sigma"][1] / 1.01,
                      math.sqrt(2.0 * lam) * 0.95)
        elif 2.0 * lam <= sig * sig:
            lam = sig * sig  # SigmaKnown: keep lambda strictly inside the constraint
        return lam, cap, sig


def _free_names(kind):
    if kind is None:
        return ("lambda", "capacity", "sigma")
    return ("capacity", "sigma") if kind == "lambda" else ("lambda", "capacity")


def _run_mark_search(neg_loglik, data, opts: FitOptions, notes):
    coords = _MarkCoords(opts.fixed, opts.box())

    def objective(w):
        try:
            lam, cap, sig = coords.to_natural(w)
        except OverflowError:
            return np.inf
        if not coords.feasible(lam, cap, sig):
            return np.inf
        val = neg_loglik(CirParams(lam, cap, sig))
        return val if math.isfinite(val) else np.inf

    lam0, cap0, sig0 = coords.start(data, opts.init)
    res = _multistart(objective, coords.to_search(lam0, cap0, sig0), opts, notes)
    lam, cap, sig = coords.to_natural(res.x)
    names = _free_names(coords.kind)
    _boundary_notes({k: v for k, v in zip(("lambda", "capacity", "sigma"), (lam, cap, sig))
                     if k in names}, opts.box(), notes)
    if coords.kind != "sigma" and abs(2.0 * lam - sig * sig) <= 1e-9 * 2.0 * lam:
        notes.append("estimate sits on the positivity boundary 2*lambda = sigma**2")
    return lam, cap, sig, res


def fit_marks_nonstationary(traj: Trajectory, m0: float, opts: FitOptions = FitOptions()
                            ) -> MarkFit:
    """Maximise ``l1 + l2`` (or ``l1`` when ``opts.drop_l2``) over the mark parameters.

    Parameters
    ----------
    traj : Trajectory
    m0 : float
        Known size at birth.
    opts : FitOptions
        ``opts.fixed`` holds one parameter known.

    Returns
    -------
    MarkFit
    """
    if m0 is None or not (math.isfinite(m0) and m0 > 0.0):
        raise FitError(f"the nonstationary fit needs a positive birth size m0, got {m0!r}")
    data = mark_data(traj)
    if data.n_transitions == 0:
        raise FitError("no observed size transitions; the nonstationary fit needs at least one")
    nodes, weights = gauss_legendre(opts.quad_nodes)
    notes: list = []

    def neg(cp):
        l1, l2 = mark_loglik_nonstationary(data, cp, m0, nodes, weights, opts.drop_l2)
        return -(l1 + l2)

    lam, cap, sig, res = _run_mark_search(neg, data, opts, notes)
    return MarkFit(lambda_hat=lam, k_hat=cap, sigma_hat=sig, loglik=-res.value,
                   iterations=res.iterations, converged=res.converged, notes=notes,
                   history=res.history)


def gamma_mle(n: int, sum_x: float, sum_log_x: float, tol: float = 1e-12,
              max_iter: int = 100):
    """Gamma maximum-likelihood (shape, scale) from sufficient statistics.

    Newton iteration in ``log(shape)`` on
    ``log(shape) - digamma(shape) = log(mean) - mean(log x)``.
    """
    if n < 2:
        raise FitError("the Gamma fit needs at least two observations")
    mean = sum_x / n
    s = math.log(mean) - sum_log_x / n
    if not s > 1e-15:
        raise FitError("the Gamma fit needs at least two distinct values")
    a = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    t = math.log(a)
    for _ in range(max_iter):
        a = math.exp(t)
        g = math.log(a) - polygamma(0, a) - s
        dg = 1.0 - a * polygamma(1, a)
        step = g / dg
        t -= step
        if abs(step) < tol or g == 0.0:
            break
    else:
        raise FitError("Gamma shape iteration did not converge")
    shape = math.exp(t)
    return shape, mean / shape


def fit_marks_stationary(traj: Trajectory, opts: FitOptions = FitOptions()
                         ) -> StationaryMarkFit:
    """Fit the stationary Gamma law to every observed size.

    The Gamma shape and scale are identified and found by Newton's method;
    the capacity estimate is their product.  With ``opts.fixed`` set, the
    remaining parameter follows exactly from the shape.  Without it, the
    likelihood is constant along ``2 lambda / sigma^2 = shape``: the simplex
    search over all three parameters returns one point of that ridge, chosen
    by the starting point (``opts.init``), and the result carries a ridge note.
    """
    data = mark_data(traj, opts.stationary_support)
    if data.n_obs == 0:
        raise FitError("no observed sizes")
    shape, scale = gamma_mle(data.n_obs, data.sum_size, data.sum_log_size)
    cap = shape * scale
    notes: list = []
    box = opts.box()
    if opts.fixed is not None:
        kind = _fixed_kind(opts.fixed)
        if kind == "lambda":
            lam = float(opts.fixed.value)
            sig = math.sqrt(2.0 * lam / shape)
            if shape < 1.0:
                sig = math.sqrt(2.0 * lam)
                notes.append("Gamma shape below 1; sigma clamped to the positivity boundary")
        else:
            sig = float(opts.fixed.value)
            lam = shape * sig * sig / 2.0
            if shape < 1.0:
                lam = sig * sig / 2.0
                notes.append("Gamma shape below 1; lambda clamped to the positivity boundary")
        cp = CirParams(lam, cap, sig)
        ll = mark_loglik_stationary(data, cp)
        _boundary_notes({k: v for k, v in (("lambda", lam), ("capacity", cap), ("sigma", sig))
                         if k in _free_names(kind)}, box, notes)
        return StationaryMarkFit(lambda_hat=lam, k_hat=cap, sigma_hat=sig, loglik=ll,
                                 iterations=0, converged=True, notes=notes,
                                 shape_hat=shape, scale_hat=scale)

    def neg(cp):
        return -mark_loglik_stationary(data, cp)

    lam, cap_s, sig, res = _run_mark_search(neg, data, opts, notes)
    notes.append("ridge: lambda and sigma are not separately identified by the "
                 "stationary likelihood; their split follows the starting point")
    return StationaryMarkFit(lambda_hat=lam, k_hat=cap_s, sigma_hat=sig, loglik=-res.value,
                             iterations=res.iterations, converged=res.converged,
                             notes=notes, history=res.history,
                             shape_hat=shape, scale_hat=scale)


# ---------------------------------------------------------------------------
# assembled fit and asymptotic covariance
# ---------------------------------------------------------------------------

def cov_parameter_names(fixed) -> tuple:
    """Order of parameters in :func:`asymptotic_cov`: mark block, then counts."""
    kind = _fixed_kind(fixed)
    marks = ("capacity", "sigma") if kind == "lambda" else ("lambda", "capacity")
    return marks + ("alpha", "mu")


def asymptotic_cov(params: ModelParams, delta: float, fixed, area: float = 1.0,
                   tail_tol: float = 1e-12) -> NDArray[np.float64]:
    """Asymptotic covariance of the scaled estimator with one mark parameter known.

    Block diagonal: the inverted diagonal mark block for the two free mark
    parameters, then the inverse count-chain information.  The count block
    is computed for the arrival rate ``alpha * area`` and converted to the
    per-area intensity.

    Returns
    -------
    ndarray (4, 4)
        Rows/columns ordered as :func:`cov_parameter_names`.
    """
    arrival = params.alpha * area
    block = mark_fisher_block(params.cir, arrival / params.mu, fixed)
    info = idproc.fisher_info(idproc.IdParams(arrival, params.mu), delta, tail_tol)
    id_inv = info.authoritative_inverse.copy()
    convert = np.diag([1.0 / area, 1.0])
    id_inv = convert @ id_inv @ convert
    cov = np.zeros((4, 4))
    cov[0, 0] = 1.0 / block.matrix[0, 0]
    cov[1, 1] = 1.0 / block.matrix[1, 1]
    cov[2:, 2:] = id_inv
    return cov


@dataclass
class FitResult:
    """Assembled estimate with diagnostics.

    Attributes
    ----------
    estimate : ModelParams
    loglik : LogLikBreakdown
        Evaluated at the estimate.
    iterations : int
        Simplex iterations summed over both sub-fits.
    converged : bool
    covariance : ndarray (4, 4) or None
        Asymptotic covariance of ``sqrt(n) * (estimate - truth)``.
    cov_params : tuple of str or None
    ci95 : dict or None
        ``name -> (low, high)``.
    validity_flag : bool or None
        Sampling-interval condition of the normality result.
    notes : list of str
    regime : str
    fixed : LambdaKnown, SigmaKnown or None
    n_steps : int
        Number of sampling times.
    """

    estimate: ModelParams
    loglik: LogLikBreakdown
    iterations: int
    converged: bool
    covariance: Optional[NDArray[np.float64]] = None
    cov_params: Optional[tuple] = None
    ci95: Optional[dict] = None
    validity_flag: Optional[bool] = None
    notes: list = field(default_factory=list)
    regime: str = "nonstationary"
    fixed: object = None
    n_steps: int = 0


def fit_full(traj: Trajectory, opts: FitOptions = FitOptions()) -> FitResult:
    """Fit mark and count parameters and assemble a :class:`FitResult`."""
    if traj.d == 0:
        raise FitError("empty trajectory: no individuals observed")
    notes: list = []
    if opts.regime == "nonstationary":
        mfit = fit_marks_nonstationary(traj, opts.m0, opts)
    else:
        mfit = fit_marks_stationary(traj, opts)
    notes.extend(mfit.notes)
    data = mark_data(traj, opts.stationary_support)
    ifit = fit_id(data.counts, data.deltas, opts, area=traj.window.area)
    notes.extend(ifit.notes)
    est = ModelParams(mfit.cir, ifit.alpha_hat, ifit.mu_hat)

    if opts.regime == "nonstationary":
        nodes, weights = gauss_legendre(opts.quad_nodes)
        l1, l2 = mark_loglik_nonstationary(data, est.cir, opts.m0, nodes, weights, opts.drop_l2)
    else:
        l1, l2 = mark_loglik_stationary(data, est.cir), None
    l3 = count_loglik(data, est.alpha, est.mu)
    ll = LogLikBreakdown(l1=float(l1), l2=None if l2 is None else float(l2), l3=float(l3),
                         regime=opts.regime)

    delta = traj.grid.delta
    validity = None
    if delta is not None:
        value, validity = idproc.validity_condition(est.alpha * traj.window.area, est.mu, delta)
        if not validity:
            notes.append("sampling-interval condition (log(alpha+mu)-log(alpha))/mu >= 2*delta "
                          f"fails ({value:.6g} < {2 * delta:.6g}); intervals are indicative only")
    cov = names = ci = None
    if opts.fixed is not None and opts.regime == "stationary":
        if delta is None:
            notes.append("covariance withheld: sampling grid is not equidistant")
        else:
            cov = asymptotic_cov(est, delta, opts.fixed, area=traj.window.area)
            names = cov_parameter_names(opts.fixed)
            n = traj.n
            values = {"lambda": est.cir.growth_rate, "capacity": est.cir.capacity,
                      "sigma": est.cir.diffusion, "alpha": est.alpha, "mu": est.mu}
            half = 1.96 * np.sqrt(np.diag(cov) / n)
            ci = {name: (values[name] - h, values[name] + h) for name, h in zip(names, half)}
    elif opts.fixed is not None:
        notes.append("covariance is only available in the stationary regime")
    elif opts.regime == "stationary":
        notes.append("covariance withheld: no mark parameter fixed (ridge)")
    return FitResult(estimate=est, loglik=ll, iterations=mfit.iterations + ifit.iterations,
                     converged=bool(mfit.converged and ifit.converged), covariance=cov,
                     cov_params=names, ci95=ci, validity_flag=validity, notes=notes,
                     regime=opts.regime, fixed=opts.fixed, n_steps=traj.n)
