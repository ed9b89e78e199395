"""Independent reference implementations used only by the tests."""
import math

import numpy as np
from scipy import integrate, linalg, stats

from sgproc import cir


def cir_window(dt, y_from, params, width=40.0):
    """Interval that carries all but a negligible part of the transition law."""
    m = cir.transition_mean(dt, y_from, params)
    s = math.sqrt(cir.transition_var(dt, y_from, params))
    return max(m - width * s, 1e-300), m + width * s, m, s


def cir_quad_moments(dt, y_from, params):
    """Mass, mean and variance of the transition density by adaptive quadrature."""
    lo, hi, m, s = cir_window(dt, y_from, params)
    pts = [p for p in (m - 3 * s, m, m + 3 * s) if lo < p < hi]

    def dens(y):
        return math.exp(cir.transition_log_pdf(dt, y, y_from, params))

    kw = dict(points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)
    mass = integrate.quad(dens, lo, hi, **kw)[0]
    mean = integrate.quad(lambda y: y * dens(y), lo, hi, **kw)[0]
    second = integrate.quad(lambda y: (y - m) ** 2 * dens(y), lo, hi, **kw)[0]
    return mass, mean, second - (mean - m) ** 2


def cir_quad_cdf(dt, y_from, params, grid_size=4001):
    """Tabulated CDF of the transition law on a fine grid (cumulative quadrature)."""
    lo, hi, _, _ = cir_window(dt, y_from, params, width=12.0)
    y = np.linspace(lo, hi, grid_size)
    dens = np.exp(cir.transition_log_pdf(dt, y, y_from, params))
    cdf = integrate.cumulative_trapezoid(dens, y, initial=0.0)
    return y, cdf / cdf[-1]


def id_generator(arrival, mu, cap):
    """Birth-death generator on states 0..cap (arrivals blocked at the cap)."""
    n = cap + 1
    q = np.zeros((n, n))
    for i in range(n):
        if i < cap:
            q[i, i + 1] = arrival
        if i > 0:
            q[i, i - 1] = i * mu
        q[i, i] = -q[i].sum()
    return q


def id_uniformization(t, arrival, mu, cap, tol=1e-15):
    """exp(t Q) by uniformization: sum_k Pois(Lambda t)(k) P^k, P = I + Q / Lambda."""
    q = id_generator(arrival, mu, cap)
    lam = max(-np.diag(q)) * 1.05
    p = np.eye(cap + 1) + q / lam
    kmax = int(stats.poisson.ppf(1 - tol, lam * t)) + 10
    weights = stats.poisson.pmf(np.arange(kmax + 1), lam * t)
    out = np.zeros_like(p)
    power = np.eye(cap + 1)
    for k in range(kmax + 1):
        out += weights[k] * power
        power = power @ p
    return out


def id_expm(t, arrival, mu, cap):
    return linalg.expm(t * id_generator(arrival, mu, cap))


def id_state_cap(arrival, mu):
    mean = arrival / mu
    return max(50, int(mean + 12 * math.sqrt(mean)))


def gamma_logpdf(x, shape, scale):
    """Gamma log-density written out from its definition."""
    x = np.asarray(x, dtype=float)
    return (shape - 1) * np.log(x) - x / scale - math.lgamma(shape) - shape * math.log(scale)


def ks_critical_1pct(n, m=None):
    """Asymptotic 1% critical value of the one- or two-sample KS statistic."""
    c = 1.628
    if m is None:
        return c / math.sqrt(n)
    return c * math.sqrt((n + m) / (n * m))
