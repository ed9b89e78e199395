"""Stochastic-growth process: simulation and the trajectory data model.

Individuals arrive as a Poisson stream on ``(0, horizon)``, settle at a
uniform location in a rectangular window, live for an exponential time and
grow independently along CIR paths.  A :class:`Trajectory` stores what is
seen at the sampling times: a size-time matrix whose row ``i`` is positive
exactly while individual ``i`` is alive.

Sampling-time indices are 1-based (``T_0 = 0`` is index 0 and never
observed); row indices of the size-time matrix are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from . import cir
from ._backend import USE_NUMBA, njit
from .cir import CirParams
from .errors import DomainError, TrajectoryError
from .idproc import IdParams

__all__ = [
    "ModelParams",
    "WindowSpec",
    "SamplingGrid",
    "Individual",
    "FixedInit",
    "StationaryInit",
    "ExactScheme",
    "EulerScheme",
    "Trajectory",
    "DiskSnapshot",
    "SupportSets",
    "simulate",
    "support_sets",
    "boolean_snapshot",
    "parse_init_mode",
    "parse_mark_scheme",
]

#: Sizes are floored here so that a path touching zero still counts as alive.
SIZE_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class ModelParams:
    """Full parameter vector: growth diffusion plus arrival and death rates.

    ``alpha`` is the arrival intensity per unit area and time.
    """

    cir: CirParams
    alpha: float
    mu: float

    def __post_init__(self):
        for name in ("alpha", "mu"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {val!r}")
            object.__setattr__(self, name, val)

    @classmethod
    def from_values(cls, growth_rate, capacity, diffusion, alpha, mu) -> "ModelParams":
        return cls(CirParams(growth_rate, capacity, diffusion), alpha, mu)

    def id_params(self, window: "WindowSpec") -> IdParams:
        return IdParams(self.alpha * window.area, self.mu)

    def as_dict(self) -> dict:
        return {"lambda": self.cir.growth_rate, "capacity": self.cir.capacity,
                "sigma": self.cir.diffusion, "alpha": self.alpha, "mu": self.mu}


@dataclass(frozen=True)
class WindowSpec:
    """Rectangular observation window ``[0, width] x [0, height]``."""

    width: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        for name in ("width", "height"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0.0):
                raise DomainError(f"window {name} must be positive, got {val!r}")
            object.__setattr__(self, name, val)

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, xy) -> NDArray[np.bool_]:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return ((xy[:, 0] >= 0.0) & (xy[:, 0] <= self.width)
                & (xy[:, 1] >= 0.0) & (xy[:, 1] <= self.height))


class SamplingGrid:
    """Strictly increasing positive sampling times ``T_1 < ... < T_n``.

    Parameters
    ----------
    times : sequence of float
    """

    def __init__(self, times: Sequence[float]):
        t = np.array(times, dtype=float).ravel()
        if t.size == 0:
            raise DomainError("a sampling grid needs at least one time")
        if not np.all(np.isfinite(t)) or t[0] <= 0.0 or np.any(np.diff(t) <= 0.0):
            raise DomainError("sampling times must be finite, positive and strictly increasing")
        t.flags.writeable = False
        self._times = t

    @classmethod
    def equidistant(cls, delta: float, n: int) -> "SamplingGrid":
        if not delta > 0.0 or int(n) != n or n < 1:
            raise DomainError("equidistant grid needs delta > 0 and n >= 1")
        return cls(delta * np.arange(1, int(n) + 1))

    @property
    def times(self) -> NDArray[np.float64]:
        return self._times

    @property
    def n(self) -> int:
        return self._times.size

    @property
    def deltas(self) -> NDArray[np.float64]:
        """Gaps ``T_k - T_{k-1}`` with ``T_0 = 0``."""
        return np.diff(self._times, prepend=0.0)

    @property
    def delta(self) -> Optional[float]:
        """Common spacing when ``T_k = k delta`` (to 1e-9 relative), else None."""
        d = self._times[0]
        expect = d * np.arange(1, self.n + 1)
        if np.all(np.abs(self._times - expect) <= 1e-9 * self._times[-1]):
            return float(d)
        return None

    @property
    def is_equidistant(self) -> bool:
        return self.delta is not None

    def __eq__(self, other):
        return isinstance(other, SamplingGrid) and np.array_equal(self._times, other._times)

    def __repr__(self):
        return f"SamplingGrid(n={self.n}, last={self._times[-1]!r})"


@dataclass(frozen=True)
class Individual:
    """One individual: identifier, location and (when known) its lifetime."""

    id: int
    location: tuple
    birth: Optional[float] = None
    death: Optional[float] = None


@dataclass(frozen=True)
class FixedInit:
    """Every newborn starts at the same size."""

    value: float = 0.1

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value > 0.0):
            raise DomainError(f"initial size must be positive, got {self.value!r}")

    def __str__(self):
        return f"fixed:{self.value!r}"


@dataclass(frozen=True)
class StationaryInit:
    """Newborns draw their initial size from the stationary Gamma law."""

    def __str__(self):
        return "stationary"


InitMode = Union[FixedInit, StationaryInit]


def parse_init_mode(text: str) -> InitMode:
    """Parse ``fixed:<value>`` or ``stationary``."""
    text = text.strip()
    if text == "stationary":
        return StationaryInit()
    if text.startswith("fixed:"):
        try:
            value = float(text[len("fixed:"):])
        except ValueError:
            raise DomainError(f"bad initial size in {text!r}") from None
        return FixedInit(value)
    raise DomainError(f"init mode must be 'fixed:<v>' or 'stationary', got {text!r}")


@dataclass(frozen=True)
class ExactScheme:
    """Exact CIR transitions between birth and grid times."""

    def __str__(self):
        return "exact"


@dataclass(frozen=True)
class EulerScheme:
    """Euler-Maruyama with sub-step at most ``step`` inside each sampling gap."""

    step: float = 0.01
    positivity: str = "reflect"

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0.0):
            raise DomainError(f"Euler step must be positive, got {self.step!r}")
        if self.positivity not in ("reflect", "truncate"):
            raise DomainError(f"unknown positivity fix {self.positivity!r}")

    def __str__(self):
        tail = "" if self.positivity == "reflect" else ":truncate"
        return f"euler:{self.step!r}{tail}"


def parse_mark_scheme(text: str):
    """Parse ``exact``, ``euler:<dt>`` or ``euler:<dt>:truncate``."""
    text = text.strip()
    if text == "exact":
        return ExactScheme()
    parts = text.split(":")
    if parts[0] == "euler" and len(parts) in (2, 3):
        try:
            step = float(parts[1])
        except ValueError:
            raise DomainError(f"bad Euler step in {text!r}") from None
        return EulerScheme(step, parts[2] if len(parts) == 3 else "reflect")
    raise DomainError(f"mark scheme must be 'exact' or 'euler:<dt>', got {text!r}")


@dataclass(eq=False)
class Trajectory:
    """Discretely sampled realisation of the process.

    Attributes
    ----------
    window : WindowSpec
    grid : SamplingGrid
    ids : ndarray of int, shape (d,)
        Strictly increasing identifiers, one per row.
    locations : ndarray, shape (d, 2)
    sizes : ndarray, shape (d, n)
        Size-time matrix; zero where the individual is not alive.
    init_mode : FixedInit or StationaryInit or None
        How newborn sizes were set, when known.
    births, deaths : ndarray or None
        Latent lifetimes, present for simulated data.
    horizon : float or None
        End of the simulated period.
    meta : dict
        Free-form string metadata carried through files.
    """

    window: WindowSpec
    grid: SamplingGrid
    ids: NDArray[np.int64]
    locations: NDArray[np.float64]
    sizes: NDArray[np.float64]
    init_mode: Optional[InitMode] = None
    births: Optional[NDArray[np.float64]] = None
    deaths: Optional[NDArray[np.float64]] = None
    horizon: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        self.locations = np.asarray(self.locations, dtype=float).reshape(-1, 2)
        self.sizes = np.asarray(self.sizes, dtype=float).reshape(len(self.ids), self.grid.n)
        if self.births is not None:
            self.births = np.asarray(self.births, dtype=float).reshape(-1)
        if self.deaths is not None:
            self.deaths = np.asarray(self.deaths, dtype=float).reshape(-1)
        if len(self.ids) == 0 and self.births is not None and self.deaths is not None \
                and self.births.size == 0 and self.deaths.size == 0:
            # no individuals, no latent state; keeps empty files round-tripping exactly
            self.births = self.deaths = None
        self.validate()

    @property
    def d(self) -> int:
        return self.sizes.shape[0]

    @property
    def n(self) -> int:
        return self.grid.n

    def validate(self):
        """Check every structural invariant; raise :class:`TrajectoryError`."""
        d = len(self.ids)
        if self.locations.shape != (d, 2):
            raise TrajectoryError("locations must have one (x, y) pair per individual")
        if d and np.any(np.diff(self.ids) <= 0):
            raise TrajectoryError("individual ids must be strictly increasing")
        m = self.sizes
        if not np.all(np.isfinite(m)) or np.any(m < 0.0):
            bad = int(np.argwhere(~np.isfinite(m) | (m < 0.0))[0, 0])
            raise TrajectoryError("sizes must be finite and nonnegative", row=bad,
                                  individual_id=int(self.ids[bad]))
        if d and not np.all(self.window.contains(self.locations)):
            bad = int(np.argmin(self.window.contains(self.locations)))
            raise TrajectoryError(f"individual {self.ids[bad]} lies outside the window",
                                  row=bad, individual_id=int(self.ids[bad]))
        _first_alive(m, self.ids)
        if (self.births is None) != (self.deaths is None):
            raise TrajectoryError("births and deaths must be given together")
        if self.births is not None:
            self._validate_latent()

    def _validate_latent(self):
        b, dth = self.births, self.deaths
        if b.shape != (self.d,) or dth.shape != (self.d,):
            raise TrajectoryError("one birth and one death time per individual required")
        horizon = self.horizon if self.horizon is not None else float(np.max(dth, initial=0.0))
        bad = (b < 0.0) | (dth <= b) | (dth > horizon)
        if np.any(bad):
            row = int(np.argmax(bad))
            raise TrajectoryError(
                f"individual {self.ids[row]}: need 0 <= birth < death <= horizon",
                row=row, individual_id=int(self.ids[row]))
        t = self.grid.times[None, :]
        censored = (dth == horizon)[:, None]
        alive = (b[:, None] <= t) & ((t < dth[:, None]) | (censored & (t == horizon)))
        mismatch = alive != (self.sizes > 0.0)
        if np.any(mismatch):
            row = int(np.argwhere(mismatch)[0, 0])
            raise TrajectoryError(
                f"sizes of individual {self.ids[row]} disagree with its lifetime",
                row=row, individual_id=int(self.ids[row]))

    @property
    def individuals(self) -> list:
        out = []
        for r in range(self.d):
            out.append(Individual(
                id=int(self.ids[r]),
                location=(float(self.locations[r, 0]), float(self.locations[r, 1])),
                birth=None if self.births is None else float(self.births[r]),
                death=None if self.deaths is None else float(self.deaths[r])))
        return out

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)

        return (self.window == other.window and self.grid == other.grid
                and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.locations, other.locations)
                and np.array_equal(self.sizes, other.sizes)
                and str(self.init_mode) == str(other.init_mode)
                and same(self.births, other.births) and same(self.deaths, other.deaths)
                and self.horizon == other.horizon and self.meta == other.meta)

    __hash__ = None


def _first_alive(sizes, ids):
    """First alive column of each row; validates contiguity and nonempty rows."""
    alive = sizes > 0.0
    d = alive.shape[0]
    if d == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    has = alive.any(axis=1)
    if not np.all(has):
        row = int(np.argmin(has))
        raise TrajectoryError(f"individual {ids[row]} is never alive", row=row,
                              individual_id=int(ids[row]))
    first = np.argmax(alive, axis=1)
    last = alive.shape[1] - 1 - np.argmax(alive[:, ::-1], axis=1)
    span = alive.sum(axis=1)
    gap = span != last - first + 1
    if np.any(gap):
        row = int(np.argmax(gap))
        raise TrajectoryError(
            f"individual {ids[row]} has a gap in its alive block (contiguity violated)",
            row=row, individual_id=int(ids[row]))
    return first, last


@dataclass(frozen=True)
class DiskSnapshot:
    """Union-of-disks picture at one sampling time: rows of (x, y, radius)."""

    time: float
    disks: NDArray[np.float64]
    window: WindowSpec = WindowSpec()

    def __post_init__(self):
        disks = np.asarray(self.disks, dtype=float).reshape(-1, 3)
        if np.any(disks[:, 2] <= 0.0):
            raise DomainError("snapshot radii must be positive")
        object.__setattr__(self, "disks", disks)

    def __len__(self):
        return self.disks.shape[0]


@dataclass(frozen=True)
class SupportSets:
    """Alive index sets per sampling time and first-alive indices per row.

    Attributes
    ----------
    omega : list of ndarray
        ``omega[k]`` holds the 0-based rows alive at ``T_k``; ``omega[0]`` is
        the empty set at time zero, so the list has ``n + 1`` entries.
    first_index : ndarray of int
        1-based sampling index at which each row is first alive.
    counts : ndarray of int
        ``|omega_k|`` for ``k = 0..n`` (``counts[0] == 0``).
    """

    omega: list
    first_index: NDArray[np.int64]
    counts: NDArray[np.int64]


def support_sets(traj: Trajectory) -> SupportSets:
    """Alive sets, first-alive indices and the count sequence of a trajectory."""
    first, _ = _first_alive(traj.sizes, traj.ids)
    alive = traj.sizes > 0.0
    omega = [np.zeros(0, dtype=np.int64)]
    omega.extend(np.flatnonzero(alive[:, k]) for k in range(traj.n))
    counts = np.concatenate([[0], alive.sum(axis=0)]).astype(np.int64)
    return SupportSets(omega=omega, first_index=first.astype(np.int64) + 1, counts=counts)


def boolean_snapshot(traj: Trajectory, k: int) -> DiskSnapshot:
    """Disks of the individuals alive at sampling index ``k`` (1-based)."""
    if isinstance(k, bool) or int(k) != k or not 1 <= k <= traj.n:
        raise DomainError(f"sampling index must lie in 1..{traj.n}, got {k!r}")
    col = traj.sizes[:, int(k) - 1]
    rows = col > 0.0
    disks = np.column_stack([traj.locations[rows], col[rows]])
    return DiskSnapshot(time=float(traj.grid.times[int(k) - 1]), disks=disks,
                        window=traj.window)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

@njit
def _euler_interval_nb(state, start_node, frac, h, nsub, normals, lam, cap, sig, truncate):
    out = np.empty(state.shape[0])
    for i in range(state.shape[0]):
        y = state[i]
        if frac[i] > 0.0:
            dt = frac[i]
            pos = y if y > 0.0 else 0.0
            y = y + lam * (1.0 - pos / cap) * dt + sig * math.sqrt(pos * dt) * normals[i, nsub]
            if not truncate:
                y = abs(y)
        for j in range(start_node[i], nsub):
            pos = y if y > 0.0 else 0.0
            y = y + lam * (1.0 - pos / cap) * h + sig * math.sqrt(pos * h) * normals[i, j]
            if not truncate:
                y = abs(y)
        out[i] = y
    return out


def _euler_interval_np(state, start_node, frac, h, nsub, normals, lam, cap, sig, truncate):
    y = state.copy()
    first = frac > 0.0
    if np.any(first):
        dt = frac[first]
        pos = np.maximum(y[first], 0.0)
        y[first] = (y[first] + lam * (1.0 - pos / cap) * dt
                    + sig * np.sqrt(pos * dt) * normals[first, nsub])
        if not truncate:
            y[first] = np.abs(y[first])
    for j in range(nsub):
        act = start_node <= j
        if not np.any(act):
            continue
        pos = np.maximum(y[act], 0.0)
        y[act] = y[act] + lam * (1.0 - pos / cap) * h + sig * np.sqrt(pos * h) * normals[act, j]
        if not truncate:
            y[act] = np.abs(y[act])
    return y


_euler_interval = _euler_interval_nb if USE_NUMBA else _euler_interval_np


def simulate(params: ModelParams, window: WindowSpec, horizon: float,
             grid: SamplingGrid, init_mode: InitMode = FixedInit(0.1),
             mark_scheme=ExactScheme(), rng: Optional[np.random.Generator] = None
             ) -> Trajectory:
    """Simulate one realisation and sample it on ``grid``.

    Parameters
    ----------
    params : ModelParams
    window : WindowSpec
    horizon : float
        Length of the arrival period; at least the last sampling time.
    grid : SamplingGrid
    init_mode : FixedInit or StationaryInit
    mark_scheme : ExactScheme or EulerScheme
        ``ExactScheme`` draws exact transitions birth -> first sampling time
        and sampling time -> sampling time.  ``EulerScheme(step)`` splits
        every sampling gap into equal sub-steps no longer than ``step``; a
        newborn first takes a fractional step up to the next sub-step node.
    rng : numpy.random.Generator

    Returns
    -------
    Trajectory
        Individuals never alive at a sampling time are dropped; the total
        number of arrivals is kept in ``meta["arrivals"]``.  An
        individual is alive at ``T_k`` when ``birth <= T_k < birth + lifetime``;
        its recorded death is ``min(birth + lifetime, horizon)``.
    """
    if rng is None:
        raise DomainError("simulate needs an explicit random generator")
    if isinstance(mark_scheme, str):
        mark_scheme = parse_mark_scheme(mark_scheme)
    if isinstance(init_mode, str):
        init_mode = parse_init_mode(init_mode)
    horizon = float(horizon)
    if not (math.isfinite(horizon) and horizon >= grid.times[-1]):
        raise DomainError(f"horizon {horizon!r} must be at least the last sampling time")
    cp = params.cir
    if isinstance(mark_scheme, ExactScheme) or isinstance(init_mode, StationaryInit):
        cp._require_noise()

    n_arr = int(rng.poisson(params.alpha * window.area * horizon))
    births = np.sort(rng.uniform(0.0, horizon, n_arr))
    ends = births + rng.exponential(1.0 / params.mu, n_arr)
    locs = np.column_stack([rng.uniform(0.0, window.width, n_arr),
                            rng.uniform(0.0, window.height, n_arr)])
    if isinstance(init_mode, StationaryInit):
        m0 = np.asarray(cir.sample_stationary(rng, cp, size=n_arr), dtype=float)
    else:
        m0 = np.full(n_arr, init_mode.value)

    times = grid.times
    alive = (births[:, None] <= times[None, :]) & (times[None, :] < ends[:, None])
    keep = alive.any(axis=1)
    births, ends, locs, m0, alive = births[keep], ends[keep], locs[keep], m0[keep], alive[keep]
    d, n = alive.shape
    sizes = np.zeros((d, n))
    prev_t = 0.0
    state = np.zeros(d)  # internal Euler state (may be signed under truncation)
    for k in range(n):
        t = times[k]
        rows = np.flatnonzero(alive[:, k])
        if rows.size:
            was = alive[rows, k - 1] if k > 0 else np.zeros(rows.size, dtype=bool)
            if isinstance(mark_scheme, ExactScheme):
                y_from = np.where(was, sizes[rows, k - 1] if k > 0 else 0.0, m0[rows])
                dt = np.where(was, t - prev_t, t - births[rows])
                dt = np.maximum(dt, SIZE_FLOOR)
                new = np.atleast_1d(cir.sample_transition(rng, dt, y_from, cp))
                state[rows] = new
            else:
                gap = t - prev_t
                nsub = max(1, math.ceil(gap / mark_scheme.step - 1e-9))
                h = gap / nsub
                start = np.zeros(rows.size, dtype=np.int64)
                frac = np.zeros(rows.size)
                y0 = state[rows].copy()
                nb = ~was
                if np.any(nb):
                    rel = births[rows[nb]] - prev_t
                    node = np.minimum(np.ceil(rel / h), nsub).astype(np.int64)
                    start[nb] = node
                    frac[nb] = np.maximum(prev_t + node * h - births[rows[nb]], 0.0)
                    y0[nb] = m0[rows[nb]]
                normals = rng.standard_normal((rows.size, nsub + 1))
                state[rows] = _euler_interval(
                    y0, start, frac, h, nsub, normals, cp.growth_rate, cp.capacity,
                    cp.diffusion, mark_scheme.positivity == "truncate")
            sizes[rows, k] = np.maximum(state[rows], SIZE_FLOOR)
        prev_t = t

    deaths = np.minimum(ends, horizon)
    meta = {"lambda": repr(cp.growth_rate), "capacity": repr(cp.capacity),
            "sigma": repr(cp.diffusion), "alpha": repr(params.alpha),
            "mu": repr(params.mu), "mark_scheme": str(mark_scheme),
            "arrivals": str(n_arr)}
    return Trajectory(window=window, grid=grid, ids=np.arange(1, d + 1),
                      locations=locs, sizes=sizes, init_mode=init_mode,
                      births=births, deaths=deaths, horizon=horizon, meta=meta)
