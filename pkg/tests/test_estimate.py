import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sgproc import idproc
from sgproc.cir import CirParams
from sgproc.errors import DomainError, FitError
from sgproc.estimate import (FitOptions, asymptotic_cov, cov_parameter_names, fit_full, fit_id,
                             fit_marks_nonstationary, fit_marks_stationary, gamma_mle,
                             nelder_mead)
from sgproc.experiments import row_params
from sgproc.likelihood import (LambdaKnown, SigmaKnown, loglik_nonstationary, mark_data,
                               mark_fisher_block)
from sgproc.sgmodel import (FixedInit, ModelParams, SamplingGrid, StationaryInit, Trajectory,
                            WindowSpec, simulate)

GRID100 = SamplingGrid.equidistant(1.0, 100)


def simulate_row(row, seed, init=None, grid=GRID100):
    params, m0 = row_params(row)
    traj = simulate(params, WindowSpec(), grid.times[-1], grid, init or FixedInit(m0),
                    "exact", np.random.default_rng(seed))
    return traj, params, m0


@pytest.fixture(scope="module")
def row3_traj():
    return simulate_row(3, 42)


@pytest.fixture(scope="module")
def stationary_traj():
    return simulate_row(1, 7, init=StationaryInit())


class TestNelderMead:
    def test_quadratic(self):
        res = nelder_mead(lambda x: (x[0] - 3.0) ** 2, [0.0], tol=1e-14)
        assert res.x[0] == pytest.approx(3.0, abs=1e-6)
        assert res.converged

    def test_rosenbrock(self):
        def rosen(x):
            return 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2
        res = nelder_mead(rosen, [-1.2, 1.0], tol=1e-16, max_iter=10000)
        assert np.allclose(res.x, [1.0, 1.0], atol=1e-4)

    def test_max_iter_one(self):
        res = nelder_mead(lambda x: float(np.sum((x - 1.0) ** 2)), [0.0, 0.0], max_iter=1)
        assert not res.converged
        assert res.iterations == 1

    def test_history_non_increasing(self):
        res = nelder_mead(lambda x: float(np.sum((x - [1.0, -2.0, 0.5]) ** 4)), np.zeros(3))
        h = np.asarray(res.history)
        assert h.size > 5 and np.all(np.diff(h) <= 0.0)

    def test_nonfinite_start(self):
        with pytest.raises(FitError):
            nelder_mead(lambda x: np.inf, [0.0])

    def test_infeasible_region_avoided(self):
        res = nelder_mead(lambda x: np.inf if x[0] < 1.0 else x[0], [2.0], tol=1e-12)
        assert res.x[0] >= 1.0 and res.value == pytest.approx(1.0, abs=1e-5)

    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_quadratic_any_center(self, a, b):
        res = nelder_mead(lambda x: (x[0] - a) ** 2 + 2 * (x[1] - b) ** 2, [0.0, 0.0],
                          tol=1e-16, step=1.0)
        assert np.allclose(res.x, [a, b], atol=1e-5)


class TestFitId:
    def test_monte_carlo_and_maximiser(self):
        errs = []
        for seed in range(30):
            traj, params, _ = simulate_row(1, 1000 + seed)
            data = mark_data(traj)
            fit = fit_id(data.counts, data.deltas)
            errs.append(abs(fit.mu_hat - 0.01))
            truth = idproc.count_log_lik(data.counts, data.deltas, idproc.IdParams(0.5, 0.01))
            assert fit.loglik >= truth - 1e-9
        assert np.median(errs) < 0.02

    def test_constant_counts(self):
        fit = fit_id([0] + [4] * 30, np.ones(30))
        assert fit.converged
        assert any("flat" in n for n in fit.notes)

    def test_all_zero(self):
        fit = fit_id(np.zeros(21, dtype=int), np.ones(20))
        assert any("all counts are zero" in n for n in fit.notes)
        assert any("alpha estimate" in n and "bound" in n for n in fit.notes)

    def test_per_area(self):
        counts, deltas = [0, 1, 2, 2, 3, 3, 2, 4, 4, 5], np.ones(9)
        a = fit_id(counts, deltas, area=1.0)
        b = fit_id(counts, deltas, area=4.0)
        assert b.alpha_hat == pytest.approx(a.alpha_hat / 4.0, rel=1e-5)
        assert b.mu_hat == pytest.approx(a.mu_hat, rel=1e-5)

    @pytest.mark.parametrize("counts,deltas", [([0, 1], [1.0]), ([0, 1, 2], [1.0])])
    def test_bad_input(self, counts, deltas):
        with pytest.raises(FitError):
            fit_id(counts, deltas)


class TestMarkFits:
    def test_row3_nonstationary(self, row3_traj):
        traj, params, m0 = row3_traj
        fit = fit_marks_nonstationary(traj, m0, FitOptions(m0=m0))
        assert fit.converged
        assert fit.k_hat == pytest.approx(5.0, rel=0.05)
        truth = loglik_nonstationary(traj, params, m0)
        assert fit.loglik >= truth.l1 + truth.l2 - 1e-8
        assert 2 * fit.lambda_hat >= fit.sigma_hat ** 2

    @pytest.mark.parametrize("bounds,value", [((0.2, 5.0), 0.2), ((1e-3, 0.05), 0.05)])
    def test_boundary_flag(self, row3_traj, bounds, value):
        traj, _, m0 = row3_traj
        fit = fit_marks_nonstationary(traj, m0, FitOptions(m0=m0, bounds={"sigma": bounds}))
        assert fit.sigma_hat == pytest.approx(value, rel=1e-6)
        assert any(n.startswith("sigma estimate") for n in fit.notes)

    def test_fixed_lambda(self, row3_traj):
        traj, _, m0 = row3_traj
        fit = fit_marks_nonstationary(traj, m0, FitOptions(m0=m0, fixed=LambdaKnown(3.0)))
        assert fit.lambda_hat == 3.0
        assert fit.k_hat == pytest.approx(5.0, rel=0.05)

    def test_fixed_sigma(self, row3_traj):
        traj, _, m0 = row3_traj
        fit = fit_marks_nonstationary(traj, m0, FitOptions(m0=m0, fixed=SigmaKnown(0.1)))
        assert fit.sigma_hat == 0.1

    def test_drop_l2_changes_objective(self, row3_traj):
        traj, _, m0 = row3_traj
        a = fit_marks_nonstationary(traj, m0, FitOptions(m0=m0))
        b = fit_marks_nonstationary(traj, m0, FitOptions(m0=m0, drop_l2=True))
        assert a.loglik != b.loglik

    @pytest.mark.parametrize("m0", [None, 0.0, -1.0, math.nan])
    def test_nonstationary_needs_m0(self, row3_traj, m0):
        with pytest.raises(FitError):
            fit_marks_nonstationary(row3_traj[0], m0)

    def test_no_transitions(self):
        t = Trajectory(window=WindowSpec(), grid=SamplingGrid([1.0, 2.0]), ids=[1],
                       locations=[[0.5, 0.5]], sizes=[[0.0, 1.0]])
        with pytest.raises(FitError):
            fit_marks_nonstationary(t, 0.1)

    def test_gamma_mle_monte_carlo(self, rng):
        x = rng.gamma(100.0, 0.05, 10_000)
        shape, scale = gamma_mle(x.size, x.sum(), np.log(x).sum())
        assert shape == pytest.approx(100.0, rel=0.05)
        assert shape * scale == pytest.approx(x.mean(), rel=1e-12)

    def test_gamma_mle_degenerate(self):
        with pytest.raises(FitError):
            gamma_mle(3, 6.0, 3 * math.log(2.0))
        with pytest.raises(FitError):
            gamma_mle(1, 2.0, math.log(2.0))

    def test_stationary_sigma_known(self, stationary_traj):
        traj = stationary_traj[0]
        fit = fit_marks_stationary(traj, FitOptions(regime="stationary", fixed=SigmaKnown(0.1)))
        assert fit.lambda_hat == pytest.approx(fit.shape_hat * 0.01 / 2.0, rel=1e-14)
        assert fit.k_hat == pytest.approx(fit.shape_hat * fit.scale_hat, rel=1e-14)
        assert fit.lambda_hat == pytest.approx(0.5, rel=0.25)

    def test_stationary_lambda_known(self, stationary_traj):
        fit = fit_marks_stationary(stationary_traj[0],
                                   FitOptions(regime="stationary", fixed=LambdaKnown(0.5)))
        assert fit.sigma_hat == pytest.approx(math.sqrt(1.0 / fit.shape_hat), rel=1e-14)

    def test_stationary_ridge(self, stationary_traj):
        fit = fit_marks_stationary(stationary_traj[0], FitOptions(regime="stationary"))
        assert any(n.startswith("ridge") for n in fit.notes)
        shape = 2 * fit.lambda_hat / fit.sigma_hat ** 2
        assert shape == pytest.approx(fit.shape_hat, rel=1e-3)
        assert fit.k_hat == pytest.approx(fit.shape_hat * fit.scale_hat, rel=1e-4)


class TestCovariance:
    def test_capacity_entry_row1(self):
        p, _ = row_params(1)
        cov = asymptotic_cov(p, 1.0, LambdaKnown(0.5))
        assert cov[0, 0] == pytest.approx(0.005, rel=1e-12)
        assert cov_parameter_names(LambdaKnown(0.5)) == ("capacity", "sigma", "alpha", "mu")
        assert cov_parameter_names(SigmaKnown(0.1)) == ("lambda", "capacity", "alpha", "mu")

    @pytest.mark.parametrize("fixed", [LambdaKnown(0.5), SigmaKnown(0.1)])
    def test_reciprocal_of_block(self, fixed):
        p, _ = row_params(1)
        cov = asymptotic_cov(p, 1.0, fixed)
        block = mark_fisher_block(p.cir, p.alpha / p.mu, fixed).matrix
        assert np.allclose(cov[:2, :2], np.diag(1.0 / np.diag(block)), rtol=1e-10, atol=0)
        expect = idproc.fisher_info(idproc.IdParams(0.5, 0.01), 1.0).authoritative_inverse
        assert np.allclose(cov[2:, 2:], expect, rtol=1e-12)
        assert np.array_equal(cov, cov.T)
        assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_sigma_known_formula(self):
        p, _ = row_params(4)
        cov = asymptotic_cov(p, 1.0, SigmaKnown(0.5))
        from sgproc.likelihood import c_theta
        ratio = p.mu / p.alpha
        assert cov[0, 0] == pytest.approx(ratio * 3.0 * 0.25 / (2 * c_theta(p.cir)), rel=1e-12)
        assert cov[1, 1] == pytest.approx(ratio * 25 * 0.25 / 6.0, rel=1e-12)


class TestFitFull:
    def test_separability(self, row3_traj):
        traj, _, m0 = row3_traj
        opts = FitOptions(m0=m0)
        full = fit_full(traj, opts)
        marks = fit_marks_nonstationary(traj, m0, opts)
        data = mark_data(traj)
        ids = fit_id(data.counts, data.deltas, opts)
        assert full.estimate.cir.as_tuple() == (marks.lambda_hat, marks.k_hat, marks.sigma_hat)
        assert (full.estimate.alpha, full.estimate.mu) == (ids.alpha_hat, ids.mu_hat)
        assert full.loglik.l1 + full.loglik.l2 == pytest.approx(marks.loglik, rel=1e-12)
        assert full.covariance is None

    def test_stationary_with_fixed(self, stationary_traj):
        traj = stationary_traj[0]
        res = fit_full(traj, FitOptions(regime="stationary", fixed=SigmaKnown(0.1)))
        assert res.cov_params == ("lambda", "capacity", "alpha", "mu")
        assert res.covariance.shape == (4, 4)
        assert np.all(np.linalg.eigvalsh(res.covariance) > 0)
        half = 1.96 * math.sqrt(res.covariance[1, 1] / traj.n)
        lo, hi = res.ci95["capacity"]
        assert (lo, hi) == pytest.approx((res.estimate.cir.capacity - half,
                                          res.estimate.cir.capacity + half), rel=1e-14)
        assert res.loglik.l2 is None

    def test_validity_note(self, stationary_traj):
        # delta = 1 with mu near 0.01: (log(alpha+mu)-log alpha)/mu is about 1.99 < 2
        res = fit_full(stationary_traj[0], FitOptions(regime="stationary",
                                                      fixed=SigmaKnown(0.1)))
        value, flag = idproc.validity_condition(res.estimate.alpha, res.estimate.mu, 1.0)
        assert res.validity_flag is flag
        if not flag:
            assert any("sampling-interval condition" in n for n in res.notes)
            assert res.ci95 is not None

    def test_validity_fails_for_dense_arrivals(self):
        traj, _, _ = simulate_row(1, 5, init=StationaryInit(),
                                  grid=SamplingGrid.equidistant(50.0, 30))
        res = fit_full(traj, FitOptions(regime="stationary", fixed=SigmaKnown(0.1)))
        assert res.validity_flag is False
        assert any("sampling-interval condition" in n for n in res.notes)
        assert res.ci95 is not None

    def test_ridge_withholds_covariance(self, stationary_traj):
        res = fit_full(stationary_traj[0], FitOptions(regime="stationary"))
        assert res.covariance is None and res.ci95 is None
        assert any("ridge" in n for n in res.notes)

    def test_empty_trajectory(self):
        t = Trajectory(window=WindowSpec(), grid=GRID100, ids=[], locations=np.zeros((0, 2)),
                       sizes=np.zeros((0, 100)))
        with pytest.raises(FitError):
            fit_full(t, FitOptions(m0=0.1))


class TestOptions:
    @pytest.mark.parametrize("kw", [dict(regime="both"), dict(tol=0.0),
                                    dict(fixed="lambda"), dict(bounds={"lambda": (2.0, 1.0)}),
                                    dict(bounds={"gamma": (1.0, 2.0)}),
                                    dict(bounds={"sigma": (3.0, 5.0), "lambda": (0.1, 1.0)}),
                                    dict(stationary_support="none")])
    def test_rejected(self, kw):
        with pytest.raises(DomainError):
            FitOptions(**kw)
