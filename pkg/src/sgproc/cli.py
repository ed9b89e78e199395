"""Command-line entry point ``sgproc``.

Subcommands: ``simulate``, ``fit``, ``table1``, ``fisher`` and ``snapshot``.

Exit codes: 0 success, 2 usage or validation error, 3 unreadable or invalid
input data, 4 optimizer non-convergence (the fit report is still written).
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import dataio, idproc
from .cir import CirParams
from .errors import (ConvergenceError, DomainError, FitError, TrajectoryError)
from .estimate import FitOptions, fit_full
from .experiments import Table1Config, format_table1, run_table1
from .likelihood import (LambdaKnown, SigmaKnown, c_theta, expected_info_marks,
                         mark_fisher_block)
from .sgmodel import (ModelParams, SamplingGrid, WindowSpec, boolean_snapshot,
                      parse_init_mode, parse_mark_scheme, simulate)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NONCONVERGED = 4


class UsageError(Exception):
    """Invalid flag value; the message names the flag."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str, flag: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def _parse_fix(text: str):
    if text == "none":
        return None
    kind, _, value = text.partition(":")
    if kind not in ("lambda", "sigma") or not value:
        raise UsageError(f"--fix: expected lambda:<v>, sigma:<v> or none, got {text!r}")
    try:
        v = float(value)
    except ValueError:
        raise UsageError(f"--fix: bad value {value!r}") from None
    return LambdaKnown(v) if kind == "lambda" else SigmaKnown(v)


def _parse_bounds(text: Optional[str]) -> Optional[dict]:
    """``name=low:high`` pairs separated by commas."""
    if not text:
        return None
    out = {}
    for item in text.split(","):
        name, _, rng = item.partition("=")
        lo, _, hi = rng.partition(":")
        try:
            out[name.strip()] = (float(lo), float(hi))
        except ValueError:
            raise UsageError(f"--bounds: expected name=low:high, got {item!r}") from None
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sgproc", description="Simulate and fit stochastic growth processes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a trajectory file")
    p.add_argument("--lambda", dest="growth_rate", type=float, required=True)
    p.add_argument("--capacity", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--height", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--times", default=None, help="comma-separated sampling times")
    p.add_argument("--horizon", type=float, default=None,
                   help="arrival period; defaults to the last sampling time")
    p.add_argument("--init", default="fixed:0.1")
    p.add_argument("--mark-scheme", default="exact")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit a trajectory file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--regime", choices=("stationary", "nonstationary"), default="nonstationary")
    p.add_argument("--m0", type=float, default=None)
    p.add_argument("--fix", default="none")
    p.add_argument("--drop-l2", action="store_true")
    p.add_argument("--ci", action="store_true")
    p.add_argument("--bounds", default=None, help="name=low:high,...")
    p.add_argument("--stationary-support", choices=("all", "exclude-first"), default="all")
    p.add_argument("--out", required=True)

    p = sub.add_parser("table1", help="replicated re-estimation study")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--rows", default=None, help="comma-separated subset of 1,2,3,4")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scheme", default=None, help="exact or euler:<dt>")
    p.add_argument("--stationary-support", choices=("all", "exclude-first"), default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fisher", help="print the asymptotic information matrices")
    p.add_argument("--lambda", dest="growth_rate", type=float, required=True)
    p.add_argument("--capacity", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--fix", choices=("lambda", "sigma"), default="sigma")
    p.add_argument("--xi-tol", type=float, default=1e-12)

    p = sub.add_parser("snapshot", help="export the disks alive at one sampling time")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--time-index", type=int, required=True)
    p.add_argument("--format", choices=("csv", "svg"), default="csv")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out", required=True)
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        params = ModelParams.from_values(args.growth_rate, args.capacity, args.sigma,
                                         args.alpha, args.mu)
    except DomainError as exc:
        raise UsageError(f"--lambda/--capacity/--sigma/--alpha/--mu: {exc}") from None
    try:
        window = WindowSpec(args.width, args.height)
    except DomainError as exc:
        raise UsageError(f"--width/--height: {exc}") from None
    try:
        if args.times is not None:
            grid = SamplingGrid(_floats(args.times, "--times"))
        else:
            grid = SamplingGrid.equidistant(args.delta, args.steps)
    except DomainError as exc:
        raise UsageError(f"--delta/--steps/--times: {exc}") from None
    horizon = float(grid.times[-1]) if args.horizon is None else args.horizon
    if not horizon >= grid.times[-1]:
        raise UsageError("--horizon: must be at least the last sampling time")
    try:
        init = parse_init_mode(args.init)
    except DomainError as exc:
        raise UsageError(f"--init: {exc}") from None
    try:
        scheme = parse_mark_scheme(args.mark_scheme)
    except DomainError as exc:
        raise UsageError(f"--mark-scheme: {exc}") from None
    if args.seed < 0:
        raise UsageError("--seed: must be nonnegative")
    try:
        traj = simulate(params, window, horizon, grid, init, scheme,
                        np.random.default_rng(args.seed))
    except DomainError as exc:
        raise UsageError(f"--sigma: {exc}") from None
    traj.meta["seed"] = str(args.seed)
    dataio.write_trajectory(traj, args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    fixed = _parse_fix(args.fix)
    bounds = _parse_bounds(args.bounds)
    if args.regime == "nonstationary" and args.m0 is None:
        raise UsageError("--m0: required for the nonstationary regime")
    if args.m0 is not None and not (math.isfinite(args.m0) and args.m0 > 0.0):
        raise UsageError("--m0: must be positive")
    try:
        opts = FitOptions(regime=args.regime, m0=args.m0, fixed=fixed, bounds=bounds,
                          drop_l2=args.drop_l2, stationary_support=args.stationary_support)
    except DomainError as exc:
        raise UsageError(f"--bounds/--fix: {exc}") from None
    try:
        traj = dataio.read_trajectory(args.inp)
    except OSError as exc:
        print(f"sgproc fit: cannot read {args.inp}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrajectoryError as exc:
        print(f"sgproc fit: invalid trajectory {args.inp}: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        result = fit_full(traj, opts)
    except FitError as exc:
        print(f"sgproc fit: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"sgproc fit: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if not args.ci:
        result = replace(result, covariance=None, cov_params=None, ci95=None)
    dataio.write_fit_report(result, args.out)
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_table1(args) -> int:
    cfg = Table1Config()
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = dataio.parse_table1_config(fh.read())
        except OSError as exc:
            print(f"sgproc table1: cannot read {args.config}: {exc}", file=sys.stderr)
            return EXIT_DATA
        except DomainError as exc:
            raise UsageError(f"--config: {exc}") from None
    changes = {}
    if args.rows is not None:
        try:
            changes["rows"] = tuple(int(v) for v in args.rows.split(","))
        except ValueError:
            raise UsageError(f"--rows: expected a list like 1,2,3,4, got {args.rows!r}") from None
    for name in ("reps", "seed", "scheme", "stationary_support"):
        if getattr(args, name) is not None:
            changes[name] = getattr(args, name)
    try:
        cfg = replace(cfg, **changes)
    except DomainError as exc:
        raise UsageError(f"--rows/--reps/--seed/--scheme: {exc}") from None
    if args.jobs < 1:
        raise UsageError("--jobs: must be at least 1")
    summary = run_table1(cfg, jobs=args.jobs)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_table1(summary))
    return EXIT_OK


def _matrix_lines(name, m) -> list:
    return [f"{name}[{i}]=" + ",".join(repr(float(v)) for v in row) for i, row in enumerate(m)]


def cmd_fisher(args) -> int:
    try:
        cp = CirParams(args.growth_rate, args.capacity, args.sigma)
        cp._require_noise()
        ip = idproc.IdParams(args.alpha, args.mu)
    except DomainError as exc:
        raise UsageError(f"--lambda/--capacity/--sigma/--alpha/--mu: {exc}") from None
    if not (math.isfinite(args.delta) and args.delta > 0.0):
        raise UsageError("--delta: must be positive")
    if not args.xi_tol > 0.0:
        raise UsageError("--xi-tol: must be positive")
    fixed = LambdaKnown(cp.growth_rate) if args.fix == "lambda" else SigmaKnown(cp.diffusion)
    try:
        info = idproc.fisher_info(ip, args.delta, args.xi_tol)
    except ConvergenceError as exc:
        print(f"sgproc fisher: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    block = mark_fisher_block(cp, ip.arrival_rate / ip.death_rate, fixed)
    value, flag = idproc.validity_condition(ip.arrival_rate, ip.death_rate, args.delta)
    out = [f"c_theta={c_theta(cp)!r}",
           f"xi={info.xi!r}", f"tau0={info.tau0!r}", f"rho0={info.rho0!r}",
           "free_mark_parameters=" + ",".join(block.free_parameters)]
    out += _matrix_lines("info_marks_full", expected_info_marks(cp))
    out += _matrix_lines("info_marks", block.matrix)
    out += _matrix_lines("info_counts", info.matrix)
    out += _matrix_lines("info_counts_inverse_closed_form", info.inverse)
    out += _matrix_lines("info_counts_inverse_numeric", info.numeric_inverse)
    out += [f"inverse_residual={info.residual!r}",
            f"validity_value={value!r}", f"validity_threshold={2.0 * args.delta!r}",
            f"validity_flag={'true' if flag else 'false'}"]
    out += [f"note={note}" for note in info.notes]
    print("\n".join(out))
    return EXIT_OK


def cmd_snapshot(args) -> int:
    try:
        traj = dataio.read_trajectory(args.inp)
    except OSError as exc:
        print(f"sgproc snapshot: cannot read {args.inp}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrajectoryError as exc:
        print(f"sgproc snapshot: invalid trajectory {args.inp}: {exc}", file=sys.stderr)
        return EXIT_DATA
    if not 1 <= args.time_index <= traj.n:
        raise UsageError(f"--time-index: must lie in 1..{traj.n}, got {args.time_index}")
    if not (math.isfinite(args.scale) and args.scale > 0.0):
        raise UsageError("--scale: must be positive")
    dataio.export_snapshot(boolean_snapshot(traj, args.time_index), args.format, args.out,
                           scale=args.scale)
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "table1": cmd_table1,
    "fisher": cmd_fisher,
    "snapshot": cmd_snapshot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line; returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sgproc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
