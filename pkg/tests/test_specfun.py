import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from sgproc import specfun
from sgproc.errors import DomainError
from sgproc.specfun import (LogDomainValue, ln_gamma, log_bessel_i, log_bessel_i_scaled,
                            log_ive_nb, log_ive_np, polygamma)

# log I_q(x) computed once with mpmath at 40 digits
MPMATH_LOG_BESSEL = [
    (0.5, 2.0, 0.71600242968946804298),
    (1.0, 2.0, 0.46413447354615974426),
    (99.0, 2000.0, 1992.830310551461725),
    (599.0, 3000.0, 2935.4643114086643637),
    (0.0, 700.0, 695.80569999844344908),
    (2.5, 31.0, 28.265735432434964439),
    (50.0, 300.0, 292.0656125415761533),
    (1e3, 1e4, 9944.5149581530769935),
    (20.0, 200.0, 195.43085914409977739),
    (0.3, 1e6, 999992.17330626781323),
    (1e4, 50.0, -49920.107094576953796),
    (6.0, 130.0, 126.50928607397873624),
]


class TestLnGamma:
    def test_one(self):
        assert ln_gamma(1.0) == 0.0

    def test_half(self):
        assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-13)
        assert ln_gamma(0.5) == pytest.approx(0.5723649429, abs=1e-10)

    def test_ten_is_log_factorial(self):
        assert ln_gamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-13)

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            ln_gamma(bad)

    @given(st.floats(1e-3, 1e6))
    def test_against_mpmath(self, x):
        ref = float(mpmath.loggamma(x))
        assert ln_gamma(x) == pytest.approx(ref, rel=1e-13, abs=1e-13)


class TestPolygamma:
    def test_digamma_one(self):
        assert float(polygamma(0, 1.0)) == pytest.approx(-0.5772156649015329, rel=1e-12)

    def test_trigamma_hundred_series_oracle(self):
        # sum_{k<10^6} 1/(x+k)^2 plus the Euler-Maclaurin tail at x + 10^6
        x = 100.0
        k = np.arange(1_000_000, dtype=float)
        head = np.sum(1.0 / (x + k) ** 2)
        z = x + 1_000_000
        tail = 1.0 / z + 1.0 / (2 * z * z) + 1.0 / (6 * z ** 3)
        assert float(polygamma(1, x)) == pytest.approx(head + tail, rel=1e-12)
        assert float(polygamma(1, x)) == pytest.approx(0.0100501667, abs=1e-10)

    @pytest.mark.parametrize("order", [0, 1, 2, 3])
    def test_against_scipy(self, order):
        x = np.geomspace(1e-2, 1e5, 400)
        ref = special.polygamma(order, x)
        assert np.allclose(polygamma(order, x), ref, rtol=1e-10, atol=0)

    @given(st.floats(1e-2, 1e5))
    def test_trigamma_positive(self, x):
        assert float(polygamma(1, x)) > 0.0

    @given(st.floats(0.1, 1e4))
    def test_digamma_recurrence(self, x):
        lhs = float(polygamma(0, x + 1.0) - polygamma(0, x))
        assert lhs == pytest.approx(1.0 / x, rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("order,x", [(4, 1.0), (-1, 1.0), (0, 0.0), (1, -2.0), (0.5, 1.0)])
    def test_domain(self, order, x):
        with pytest.raises(DomainError):
            polygamma(order, x)


class TestLogBessel:
    def test_zero_zero(self):
        assert log_bessel_i(0.0, 0.0) == 0.0

    def test_zero_argument_positive_order(self):
        assert log_bessel_i(2.0, 0.0) == -math.inf

    def test_half_order_closed_form(self):
        x = 2.0
        ref = math.log(math.sqrt(2.0 / (math.pi * x)) * math.sinh(x))
        assert log_bessel_i(0.5, x) == pytest.approx(ref, rel=1e-13)

    def test_order_one_series_oracle(self):
        x, q = 2.0, 1.0
        series = sum((x / 2) ** (2 * k + q) / (math.factorial(k) * math.gamma(k + q + 1))
                     for k in range(60))
        assert series == pytest.approx(1.5906368546, rel=1e-10)
        assert log_bessel_i(q, x) == pytest.approx(math.log(series), rel=1e-13)

    @pytest.mark.parametrize("q,x,ref", MPMATH_LOG_BESSEL)
    def test_mpmath_points(self, q, x, ref):
        assert log_bessel_i(q, x) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("q,x,ref", MPMATH_LOG_BESSEL)
    def test_numpy_kernel_mpmath_points(self, q, x, ref):
        assert np.asarray(log_ive_np(q, x)).item() + x == pytest.approx(ref, rel=1e-12)

    def test_scaled_relation(self):
        q = np.array([0.0, 3.0, 99.0, 400.0])
        x = np.array([0.5, 40.0, 2000.0, 900.0])
        assert np.allclose(log_bessel_i_scaled(q, x), log_bessel_i(q, x) - x, rtol=0, atol=1e-9)

    def test_against_scipy_grid(self):
        q, x = np.meshgrid(np.linspace(0, 300, 61), np.geomspace(1e-3, 5e3, 120))
        with np.errstate(divide="ignore"):
            ref = np.log(special.ive(q, x))
        ok = np.isfinite(ref) & (special.ive(q, x) > 1e-290)
        got = log_bessel_i_scaled(q, x)
        rel = np.abs(got[ok] - ref[ok]) / np.maximum(np.abs(ref[ok]), 1.0)
        assert rel.max() < 1e-9

    def test_backends_agree(self, rng):
        q = rng.uniform(0, 500, 2000)
        x = np.exp(rng.uniform(np.log(1e-3), np.log(1e5), 2000))
        a = log_ive_nb(q, x)
        b = log_ive_np(q, x)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-11)

    def test_large_arguments_finite(self):
        assert math.isfinite(log_bessel_i(1e5, 1e6))
        assert math.isfinite(log_bessel_i(1e5, 1e-3))

    def test_broadcasting(self):
        out = log_bessel_i(np.array([[1.0], [2.0]]), np.array([1.0, 2.0, 3.0]))
        assert out.shape == (2, 3)

    @pytest.mark.parametrize("q,x", [(-1.0, 1.0), (1.0, -1.0), (math.nan, 1.0), (1.0, math.inf)])
    def test_domain(self, q, x):
        with pytest.raises(DomainError):
            log_bessel_i(q, x)

    @given(st.floats(0.0, 200.0), st.floats(1e-3, 500.0))
    def test_direct_series(self, q, x):
        k = np.arange(500)
        terms = (2 * k + q) * math.log(x / 2) - special.gammaln(k + 1) - special.gammaln(k + q + 1)
        peak = int(np.argmax(terms))
        if terms[-1] > terms[peak] - 60 and peak > 0:
            return  # series not converged within 500 terms
        ref = special.logsumexp(terms)
        assert log_bessel_i(q, x) == pytest.approx(ref, rel=1e-8, abs=1e-8)

    @given(st.floats(1.0, 300.0), st.floats(1e-2, 3000.0))
    def test_recurrence(self, q, x):
        lo, mid, hi = log_bessel_i(q - 1, x), log_bessel_i(q, x), log_bessel_i(q + 1, x)
        if min(lo, mid, hi) < math.log(1e-250):
            return
        shift = max(lo, mid, hi)
        lhs = math.exp(lo - shift) - math.exp(hi - shift)
        rhs = 2 * q / x * math.exp(mid - shift)
        assert lhs == pytest.approx(rhs, rel=1e-7)


class TestLogDomainValue:
    def test_value(self):
        assert LogDomainValue(math.log(3.0)).value == pytest.approx(3.0)
        assert LogDomainValue(-math.inf).value == 0.0


def test_debye_coefficients_known():
    # u_1(p) = (3p - 5p^3)/24 and u_2(p) = (81p^2 - 462p^4 + 385p^6)/1152
    coef = specfun._DEBYE
    assert float(coef[1, 0]) == pytest.approx(3 / 24)
    assert float(coef[1, 1]) == pytest.approx(-5 / 24)
    assert float(coef[2, 0]) == pytest.approx(81 / 1152)
    assert float(coef[2, 1]) == pytest.approx(-462 / 1152)
    assert float(coef[2, 2]) == pytest.approx(385 / 1152)
