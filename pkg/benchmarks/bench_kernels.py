"""Time the numba kernels against their pure-numpy twins.

Run with ``python benchmarks/bench_kernels.py [--repeat N] [--size N]``.
Each kernel is called once before timing so numba compilation (or cache
loading) is excluded; the best of ``--repeat`` runs is reported together
with the largest absolute difference between the two outputs.
"""
import argparse
import time

import numpy as np

from sgproc import cir, idproc, specfun
from sgproc.cir import CirParams
from sgproc.likelihood import birth_avg_nb, birth_avg_np, gauss_legendre


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(size, rng):
    p = CirParams(3.0, 5.0, 0.5)
    lam, cap, sig = p.as_tuple()
    dt = rng.uniform(0.1, 2.0, size)
    y_from = rng.uniform(0.1, 8.0, size)
    y_to = cir.sample_transition(rng, 1.0, 2.0, p, size=size)
    q = rng.uniform(0.0, 200.0, size)
    x = 10.0 ** rng.uniform(-3, 4, size)
    nodes, weights = gauss_legendre(32)
    gaps = rng.uniform(0.1, 1.0, size // 10)
    first = rng.uniform(0.2, 3.0, size // 10)
    counts = rng.poisson(50, size // 10 + 1)
    deltas = np.ones(size // 10)
    steps = cir.euler_grid(0.01, size * 0.01)
    normals = rng.standard_normal(steps.size)
    return {
        "log Bessel I (scaled)": (lambda: specfun.log_ive_nb(q, x),
                                  lambda: specfun.log_ive_np(q, x)),
        "CIR log transition density": (
            lambda: cir.logpdf_nb(dt, y_to, y_from, lam, cap, sig),
            lambda: cir.logpdf_np(dt, y_to, y_from, lam, cap, sig)),
        "birth-time average (32 nodes)": (
            lambda: birth_avg_nb(gaps, first, 0.1, lam, cap, sig, nodes, weights),
            lambda: birth_avg_np(gaps, first, 0.1, lam, cap, sig, nodes, weights)),
        "count-chain log-likelihood": (
            lambda: idproc.count_loglik_nb(counts, deltas, 25.0, 0.5),
            lambda: idproc.count_loglik_np(counts, deltas, 25.0, 0.5)),
        "Euler path": (
            lambda: cir._euler_path_nb(0.1, steps, normals, lam, cap, sig, False),
            lambda: cir._euler_path_np(0.1, steps, normals, lam, cap, sig, False)),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=20_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':32s}{'numba [ms]':>12s}{'numpy [ms]':>12s}{'speed-up':>10s}"
          f"{'max |diff|':>12s}")
    for name, (fast, slow) in cases(args.size, rng).items():
        t_nb = best_time(fast, args.repeat)
        t_np = best_time(slow, args.repeat)
        diff = float(np.max(np.abs(np.asarray(fast()) - np.asarray(slow()))))
        print(f"{name:32s}{1e3 * t_nb:12.2f}{1e3 * t_np:12.2f}{t_np / t_nb:10.1f}"
              f"{diff:12.2e}")


if __name__ == "__main__":
    main()
