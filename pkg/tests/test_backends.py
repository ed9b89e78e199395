"""The numba and pure-numpy backends give the same numbers end to end."""
import json
import os
import subprocess
import sys

import pytest

SCRIPT = r"""
import json
import numpy as np
from sgproc import _backend
from sgproc.cir import CirParams, euler_path, transition_log_pdf
from sgproc.estimate import FitOptions, fit_marks_nonstationary
from sgproc.experiments import row_params
from sgproc.idproc import IdParams, count_log_lik, transition_log_pmf
from sgproc.likelihood import loglik_nonstationary, loglik_stationary
from sgproc.sgmodel import FixedInit, SamplingGrid, WindowSpec, simulate
from sgproc.specfun import log_bessel_i

params, m0 = row_params(4)
grid = SamplingGrid.equidistant(1.0, 30)
traj = simulate(params, WindowSpec(), 30.0, grid, FixedInit(m0), "euler:0.05",
                np.random.default_rng(11))
ns = loglik_nonstationary(traj, params, m0)
st = loglik_stationary(traj, params)
fit = fit_marks_nonstationary(traj, m0, FitOptions(m0=m0, restarts=1))
cp = CirParams(0.5, 5.0, 0.1)
out = {
    "backend": _backend.BACKEND,
    "sizes_sum": float(traj.sizes.sum()),
    "l1": ns.l1, "l2": ns.l2, "l3": ns.l3, "stat_l1": st.l1,
    "bessel": [float(v) for v in log_bessel_i([0.5, 40.0, 99.0, 3000.0],
                                              [1e-3, 30.0, 2000.0, 10.0])],
    "cir": [float(v) for v in transition_log_pdf([1.0, 0.1], [5.0, 0.5], [5.0, 0.1], cp)],
    "pmf": [float(transition_log_pmf(1.0, y, x, IdParams(5.0, 0.1)))
            for y, x in ((0, 2), (3, 2), (60, 50))],
    "counts": float(count_log_lik([0, 1, 1, 3, 2], [1.0, 1.0, 1.0, 1.0], IdParams(0.5, 0.01))),
    "euler": [float(v) for v in euler_path(np.random.default_rng(5), 0.1, 0.01, 2.0, cp,
                                            "reflect")[-3:]],
    "fit": [fit.lambda_hat, fit.k_hat, fit.sigma_hat],
}
print(json.dumps(out))
"""


def run_backend(name):
    env = dict(os.environ, SGPROC_BACKEND=name)
    proc = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True,
                          text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def results():
    return run_backend("numba"), run_backend("numpy")


def test_backend_names(results):
    assert results[0]["backend"] == "numba"
    assert results[1]["backend"] == "numpy"


@pytest.mark.parametrize("key", ["sizes_sum", "l1", "l2", "l3", "stat_l1", "bessel", "cir",
                                 "pmf", "counts", "euler"])
def test_values_agree(results, key):
    nb, np_ = results[0][key], results[1][key]
    assert nb == pytest.approx(np_, rel=1e-10, abs=1e-12)


def test_fits_agree(results):
    assert results[0]["fit"] == pytest.approx(results[1]["fit"], rel=1e-5)


def test_unknown_backend_rejected():
    env = dict(os.environ, SGPROC_BACKEND="fortran")
    proc = subprocess.run([sys.executable, "-c", "import sgproc"], env=env,
                          capture_output=True, text=True)
    assert proc.returncode != 0
    assert "SGPROC_BACKEND" in proc.stderr
