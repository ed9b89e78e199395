"""Text file formats: trajectories, fit reports, study configs and snapshots.

Trajectory files are line oriented::

    #meta format_version=1
    #meta window_width=1.0
    #meta window_height=1.0
    #meta n=3
    #meta delta=1.0
    #meta init_mode=fixed:0.1
    #latent id=1 birth=0.25 death=2.5
    time_index,time,individual_id,x,y,radius
    1,1.0,1,0.5,0.25,0.43

``#meta`` lines carry one ``key=value`` pair each (the value runs to the end
of the line).  The grid is given either by ``delta`` (``T_k = k * delta``) or
by ``times`` (comma separated).  Keys other than the structural ones are kept
in :attr:`Trajectory.meta`.  Optional ``#latent`` lines record simulated
lifetimes so that a simulated trajectory survives a round trip unchanged.
``# `` lines are comments.  Floats are written with ``repr``, the shortest
decimal that reads back to the same double.
"""
from __future__ import annotations

import math
import os
from contextlib import contextmanager
from typing import Optional

import numpy as np

from .cir import CirParams
from .errors import DomainError, TrajectoryError, TrajectoryFormatError
from .estimate import FitResult
from .experiments import Table1Config
from .likelihood import LambdaKnown, LogLikBreakdown, SigmaKnown
from .sgmodel import (DiskSnapshot, ModelParams, SamplingGrid, Trajectory,
                      WindowSpec, parse_init_mode)

__all__ = [
    "FORMAT_VERSION",
    "DATA_HEADER",
    "write_trajectory",
    "read_trajectory",
    "format_trajectory",
    "parse_trajectory",
    "write_fit_report",
    "read_fit_report",
    "format_fit_report",
    "parse_fit_report",
    "export_snapshot",
    "format_table1_config",
    "parse_table1_config",
]

FORMAT_VERSION = 1
DATA_HEADER = "time_index,time,individual_id,x,y,radius"
_STRUCTURAL = ("format_version", "window_width", "window_height", "n", "delta", "times",
               "init_mode", "horizon")


@contextmanager
def _open(destination, mode):
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, mode, encoding="utf-8", newline="\n") as fh:
            yield fh
    else:
        yield destination


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def _meta_value(value) -> str:
    text = str(value)
    if "\n" in text or "\r" in text:
        raise DomainError("metadata values must fit on one line")
    return text


def format_trajectory(traj: Trajectory) -> str:
    """Serialise a trajectory to the text format."""
    traj.validate()
    times = traj.grid.times
    out = [f"#meta format_version={FORMAT_VERSION}",
           f"#meta window_width={traj.window.width!r}",
           f"#meta window_height={traj.window.height!r}",
           f"#meta n={traj.n}"]
    delta = float(times[0])
    if np.array_equal(times, delta * np.arange(1, traj.n + 1)):
        out.append(f"#meta delta={delta!r}")
    else:
        out.append("#meta times=" + ",".join(repr(float(t)) for t in times))
    if traj.init_mode is not None:
        out.append(f"#meta init_mode={traj.init_mode}")
    if traj.horizon is not None:
        out.append(f"#meta horizon={float(traj.horizon)!r}")
    for key, value in traj.meta.items():
        key = str(key)
        if key in _STRUCTURAL or not key or any(c in key for c in "= \t\n"):
            raise DomainError(f"metadata key {key!r} is reserved or malformed")
        out.append(f"#meta {key}={_meta_value(value)}")
    if traj.births is not None:
        for i, b, dth in zip(traj.ids, traj.births, traj.deaths):
            out.append(f"#latent id={int(i)} birth={float(b)!r} death={float(dth)!r}")
    out.append(DATA_HEADER)
    m = traj.sizes
    x = [repr(float(v)) for v in traj.locations[:, 0]]
    y = [repr(float(v)) for v in traj.locations[:, 1]]
    for k in range(traj.n):
        tk = repr(float(times[k]))
        for r in np.flatnonzero(m[:, k] > 0.0):
            out.append(f"{k + 1},{tk},{int(traj.ids[r])},{x[r]},{y[r]},{float(m[r, k])!r}")
    return "\n".join(out) + "\n"


def write_trajectory(traj: Trajectory, destination) -> None:
    """Write ``traj`` to a path or text stream."""
    text = format_trajectory(traj)
    with _open(destination, "w") as fh:
        fh.write(text)


def _float(text: str, what: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise TrajectoryFormatError(f"{what} is not a number: {text!r}", lineno) from None
    if not math.isfinite(value):
        raise TrajectoryFormatError(f"{what} must be finite, got {text!r}", lineno)
    return value


def _int(text: str, what: str, lineno: int) -> int:
    text = text.strip()
    if not text or not (text.isdigit() or (text[0] == "-" and text[1:].isdigit())):
        raise TrajectoryFormatError(f"{what} is not an integer: {text!r}", lineno)
    return int(text)


def parse_trajectory(text: str) -> Trajectory:
    """Parse the text format; every violation names its line number."""
    meta: dict = {}
    meta_line: dict = {}
    latent: dict = {}
    latent_line: dict = {}
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    header_at = None
    for idx, line in enumerate(lines):
        lineno = idx + 1
        if line.startswith("#meta "):
            body = line[len("#meta "):]
            if "=" not in body:
                raise TrajectoryFormatError("metadata line needs key=value", lineno)
            key, value = body.split("=", 1)
            key = key.strip()
            if not key:
                raise TrajectoryFormatError("empty metadata key", lineno)
            if key in meta:
                raise TrajectoryFormatError(f"duplicate metadata key {key!r}", lineno)
            meta[key] = value
            meta_line[key] = lineno
        elif line.startswith("#latent "):
            fields = dict(part.split("=", 1) for part in line.split()[1:] if "=" in part)
            if set(fields) != {"id", "birth", "death"} or len(line.split()) != 4:
                raise TrajectoryFormatError("latent line needs id=, birth= and death=", lineno)
            ident = _int(fields["id"], "latent id", lineno)
            if ident in latent:
                raise TrajectoryFormatError(f"duplicate latent line for id {ident}", lineno,
                                            individual_id=ident)
            latent[ident] = (_float(fields["birth"], "birth", lineno),
                             _float(fields["death"], "death", lineno))
            latent_line[ident] = lineno
        elif line.startswith("# ") or line == "#":
            continue
        elif line == DATA_HEADER:
            header_at = idx
            break
        else:
            raise TrajectoryFormatError(f"unexpected header line {line!r}", lineno)
    if header_at is None:
        raise TrajectoryFormatError(f"missing data header {DATA_HEADER!r}", len(lines) or 1)

    def need(key):
        if key not in meta:
            raise TrajectoryFormatError(f"missing metadata key {key!r}", header_at + 1)
        return meta.pop(key), meta_line[key]

    version, ln = need("format_version")
    if version.strip() != str(FORMAT_VERSION):
        raise TrajectoryFormatError(f"unsupported format_version {version!r}", ln)
    w_text, ln_w = need("window_width")
    h_text, ln_h = need("window_height")
    try:
        window = WindowSpec(_float(w_text, "window_width", ln_w),
                            _float(h_text, "window_height", ln_h))
    except DomainError as exc:
        raise TrajectoryFormatError(str(exc), ln_w) from None
    n_text, ln_n = need("n")
    n = _int(n_text, "n", ln_n)
    if n < 1:
        raise TrajectoryFormatError("n must be at least 1", ln_n)
    if ("delta" in meta) == ("times" in meta):
        raise TrajectoryFormatError("exactly one of 'delta' and 'times' is required",
                                    header_at + 1)
    if "delta" in meta:
        d_text, ln_g = need("delta")
        delta = _float(d_text, "delta", ln_g)
        if delta <= 0.0:
            raise TrajectoryFormatError("delta must be positive", ln_g)
        times = delta * np.arange(1, n + 1)
    else:
        t_text, ln_g = need("times")
        times = np.array([_float(t, "sampling time", ln_g) for t in t_text.split(",")])
        if times.size != n:
            raise TrajectoryFormatError(f"times lists {times.size} values but n={n}", ln_g)
    try:
        grid = SamplingGrid(times)
    except DomainError as exc:
        raise TrajectoryFormatError(str(exc), ln_g) from None
    init_mode = None
    if "init_mode" in meta:
        im_text, ln_i = need("init_mode")
        try:
            init_mode = parse_init_mode(im_text)
        except DomainError as exc:
            raise TrajectoryFormatError(str(exc), ln_i) from None
    horizon = None
    if "horizon" in meta:
        hz_text, ln_hz = need("horizon")
        horizon = _float(hz_text, "horizon", ln_hz)
        if horizon < times[-1]:
            raise TrajectoryFormatError("horizon precedes the last sampling time", ln_hz)

    # data rows
    columns: dict = {}   # id -> list of (k, radius)
    location: dict = {}
    first_line: dict = {}
    last_key = (0, 0)
    for idx in range(header_at + 1, len(lines)):
        lineno = idx + 1
        parts = lines[idx].split(",")
        if len(parts) != 6:
            raise TrajectoryFormatError(f"expected 6 fields, found {len(parts)}", lineno)
        k = _int(parts[0], "time_index", lineno)
        if not 1 <= k <= n:
            raise TrajectoryFormatError(f"time_index {k} outside 1..{n}", lineno)
        t = _float(parts[1], "time", lineno)
        if t != times[k - 1]:
            raise TrajectoryFormatError(
                f"time {parts[1]} does not match sampling time "
                f"{float(times[k - 1])!r} of index {k}", lineno)
        ident = _int(parts[2], "individual_id", lineno)
        if (k, ident) <= last_key:
            raise TrajectoryFormatError("rows must be sorted by (time_index, individual_id) "
                                        "without duplicates", lineno, individual_id=ident)
        last_key = (k, ident)
        x = _float(parts[3], "x", lineno)
        y = _float(parts[4], "y", lineno)
        radius = _float(parts[5], "radius", lineno)
        if radius <= 0.0:
            raise TrajectoryFormatError(f"radius must be positive, got {parts[5]}", lineno,
                                        individual_id=ident)
        if not (0.0 <= x <= window.width and 0.0 <= y <= window.height):
            raise TrajectoryFormatError(f"individual {ident} lies outside the window",
                                        lineno, individual_id=ident)
        if ident in location:
            if location[ident] != (x, y):
                raise TrajectoryFormatError(f"location of individual {ident} changes",
                                            lineno, individual_id=ident)
            prev_k = columns[ident][-1][0]
            if k != prev_k + 1:
                raise TrajectoryFormatError(
                    f"individual {ident} reappears at index {k} after leaving at {prev_k} "
                    "(contiguity violated)", lineno, individual_id=ident)
        else:
            location[ident] = (x, y)
            columns[ident] = []
            first_line[ident] = lineno
        columns[ident].append((k, radius))

    ids = np.array(sorted(columns), dtype=np.int64)
    d = ids.size
    sizes = np.zeros((d, n))
    locs = np.zeros((d, 2))
    for r, ident in enumerate(ids):
        locs[r] = location[int(ident)]
        for k, radius in columns[int(ident)]:
            sizes[r, k - 1] = radius
    births = deaths = None
    if latent:
        stray = sorted(set(latent) - set(columns))
        if stray:
            raise TrajectoryFormatError(f"latent line for unobserved id {stray[0]}",
                                        latent_line[stray[0]], individual_id=stray[0])
        missing = [int(i) for i in ids if int(i) not in latent]
        if missing:
            raise TrajectoryFormatError(f"no latent line for id {missing[0]}",
                                        first_line[missing[0]], individual_id=missing[0])
        births = np.array([latent[int(i)][0] for i in ids])
        deaths = np.array([latent[int(i)][1] for i in ids])
    try:
        return Trajectory(window=window, grid=grid, ids=ids, locations=locs, sizes=sizes,
                          init_mode=init_mode, births=births, deaths=deaths,
                          horizon=horizon, meta=meta)
    except TrajectoryError as exc:
        ident = exc.individual_id
        lineno = None
        if ident is not None:
            lineno = latent_line.get(ident, first_line.get(ident))
        raise TrajectoryFormatError(str(exc), lineno, individual_id=ident) from None


def read_trajectory(source) -> Trajectory:
    """Read a trajectory from a path or text stream."""
    with _open(source, "r") as fh:
        text = fh.read()
    return parse_trajectory(text)


# ---------------------------------------------------------------------------
# fit reports
# ---------------------------------------------------------------------------

_PARAM_KEYS = ("lambda", "capacity", "sigma", "alpha", "mu")


def _opt_float(value: Optional[float]) -> str:
    return "none" if value is None else repr(float(value))


def _fixed_text(fixed) -> str:
    if fixed is None:
        return "none"
    return f"{fixed.name}:{float(fixed.value)!r}"


def format_fit_report(result: FitResult) -> str:
    """``key=value`` lines describing a :class:`FitResult`."""
    est = result.estimate.as_dict()
    out = ["# sgproc fit report", f"format_version={FORMAT_VERSION}",
           f"regime={result.regime}", f"fixed={_fixed_text(result.fixed)}"]
    out += [f"estimate.{k}={float(est[k])!r}" for k in _PARAM_KEYS]
    ll = result.loglik
    out += [f"loglik.regime={ll.regime}", f"loglik.l1={float(ll.l1)!r}",
            f"loglik.l2={_opt_float(ll.l2)}", f"loglik.l3={float(ll.l3)!r}",
            f"# loglik.total={ll.total!r}",
            f"iterations={int(result.iterations)}",
            f"converged={'true' if result.converged else 'false'}",
            f"n_steps={int(result.n_steps)}",
            "validity_flag=" + ("none" if result.validity_flag is None
                                else "true" if result.validity_flag else "false")]
    if result.covariance is not None:
        names = result.cov_params
        out.append("cov_params=" + ",".join(names))
        for i, a in enumerate(names):
            for j, b in enumerate(names):
                out.append(f"covariance.{a}.{b}={float(result.covariance[i, j])!r}")
    if result.ci95 is not None:
        for name, (lo, hi) in result.ci95.items():
            out.append(f"ci95.{name}={float(lo)!r},{float(hi)!r}")
    for note in result.notes:
        out.append("note=" + _meta_value(note))
    return "\n".join(out) + "\n"


def write_fit_report(result: FitResult, destination) -> None:
    text = format_fit_report(result)
    with _open(destination, "w") as fh:
        fh.write(text)


def _parse_bool(text: str, key: str):
    table = {"true": True, "false": False, "none": None}
    if text not in table:
        raise DomainError(f"{key}: expected true/false/none, got {text!r}")
    return table[text]


def parse_fit_report(text: str) -> FitResult:
    """Inverse of :func:`format_fit_report`."""
    values: dict = {}
    notes = []
    ci = {}
    cov_entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        if key == "note":
            notes.append(value)
        elif key.startswith("ci95."):
            lo, hi = value.split(",")
            ci[key[len("ci95."):]] = (float(lo), float(hi))
        elif key.startswith("covariance."):
            a, b = key[len("covariance."):].split(".")
            cov_entries[(a, b)] = float(value)
        else:
            if key in values:
                raise DomainError(f"line {lineno}: duplicate key {key!r}")
            values[key] = value
    try:
        if values.pop("format_version") != str(FORMAT_VERSION):
            raise DomainError("unsupported fit report version")
        fixed_text = values.pop("fixed")
        fixed = None
        if fixed_text != "none":
            kind, val = fixed_text.split(":", 1)
            fixed = {"lambda": LambdaKnown, "sigma": SigmaKnown}[kind](float(val))
        est = {k: float(values.pop(f"estimate.{k}")) for k in _PARAM_KEYS}
        estimate = ModelParams(CirParams(est["lambda"], est["capacity"], est["sigma"]),
                               est["alpha"], est["mu"])
        l2 = values.pop("loglik.l2")
        loglik = LogLikBreakdown(l1=float(values.pop("loglik.l1")),
                                 l2=None if l2 == "none" else float(l2),
                                 l3=float(values.pop("loglik.l3")),
                                 regime=values.pop("loglik.regime"))
        regime = values.pop("regime")
        iterations = int(values.pop("iterations"))
        converged = _parse_bool(values.pop("converged"), "converged")
        n_steps = int(values.pop("n_steps"))
        validity = _parse_bool(values.pop("validity_flag"), "validity_flag")
        names = None
        cov = None
        if "cov_params" in values:
            names = tuple(values.pop("cov_params").split(","))
            cov = np.array([[cov_entries[(a, b)] for b in names] for a in names])
    except KeyError as exc:
        raise DomainError(f"fit report lacks key {exc.args[0]!r}") from None
    if values:
        raise DomainError(f"unknown fit report keys {sorted(values)}")
    return FitResult(estimate=estimate, loglik=loglik, iterations=iterations,
                     converged=bool(converged), covariance=cov, cov_params=names,
                     ci95=ci or None, validity_flag=validity, notes=notes, regime=regime,
                     fixed=fixed, n_steps=n_steps)


def read_fit_report(source) -> FitResult:
    with _open(source, "r") as fh:
        return parse_fit_report(fh.read())


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def export_snapshot(snapshot: DiskSnapshot, fmt: str, destination, scale: float = 1.0) -> None:
    """Write the disks of a snapshot as csv rows or svg circles.

    Parameters
    ----------
    snapshot : DiskSnapshot
    fmt : {"csv", "svg"}
    destination : path or text stream
    scale : float
        Display factor applied to the radii in svg output only.

    Notes
    -----
    The svg ``viewBox`` is the window rectangle.  Its y axis is flipped so
    that the picture has the usual mathematical orientation.
    """
    if fmt not in ("csv", "svg"):
        raise DomainError(f"snapshot format must be 'csv' or 'svg', got {fmt!r}")
    if not (math.isfinite(scale) and scale > 0.0):
        raise DomainError(f"scale must be positive, got {scale!r}")
    disks = snapshot.disks
    if fmt == "csv":
        out = ["x,y,radius"]
        out += [f"{float(x)!r},{float(y)!r},{float(r)!r}" for x, y, r in disks]
    else:
        w, h = snapshot.window.width, snapshot.window.height
        stroke = max(w, h) / 500.0
        out = ['<?xml version="1.0" encoding="UTF-8"?>',
               f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w!r} {h!r}" '
               'width="500" height="500" preserveAspectRatio="xMidYMid meet">',
               f'<title>t = {snapshot.time!r}</title>',
               f'<rect x="0" y="0" width="{w!r}" height="{h!r}" fill="none" '
               f'stroke="black" stroke-width="{stroke!r}"/>',
               f'<g transform="translate(0 {h!r}) scale(1 -1)" fill="gray" '
               'fill-opacity="0.5" stroke="black" '
               f'stroke-width="{stroke!r}">']
        out += [f'<circle cx="{float(x)!r}" cy="{float(y)!r}" r="{float(r) * scale!r}"/>'
                for x, y, r in disks]
        out += ["</g>", "</svg>"]
    with _open(destination, "w") as fh:
        fh.write("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# study configuration
# ---------------------------------------------------------------------------

def format_table1_config(cfg: Table1Config) -> str:
    return "\n".join([
        "# replicated re-estimation study",
        "rows=" + ",".join(str(r) for r in cfg.rows),
        f"reps={cfg.reps}",
        f"seed={cfg.seed}",
        f"scheme={cfg.scheme}",
        f"stationary_support={cfg.stationary_support}",
    ]) + "\n"


def parse_table1_config(text: str) -> Table1Config:
    """Parse ``key=value`` lines; missing keys take the defaults."""
    kwargs: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "rows":
                kwargs["rows"] = tuple(int(v) for v in value.split(","))
            elif key in ("reps", "seed"):
                kwargs[key] = int(value)
            elif key in ("scheme", "stationary_support"):
                kwargs[key] = value
            else:
                raise DomainError(f"line {lineno}: unknown key {key!r}")
        except ValueError:
            raise DomainError(f"line {lineno}: bad value for {key!r}") from None
    return Table1Config(**kwargs)
