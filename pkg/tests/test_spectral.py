import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from mfou_lan.exceptions import RemovablePointWarning, SingularityError, TruncationWarning
from mfou_lan.fisher import j_integrals
from mfou_lan.model import ModelParams
from mfou_lan.spectral import (FractionalSumConfig, eval_symbol, f_bm, f_frac, hurst_constant,
                               limit_profiles, symbol_ratios)

P = ModelParams(1.0, 0.8, 1.0)
DELTA = 1 / 32


def brute_frac(lam, params, delta, k_max=100_000):
    """Plain truncated aliasing sum, no tail model."""
    k = np.arange(-k_max, k_max + 1)
    x = lam + 2 * np.pi * k
    c = params.alpha * delta
    s = np.sum(np.abs(x) ** (1 - 2 * params.hurst) / (c * c + x * x))
    return params.sigma ** 2 * hurst_constant(params.hurst) * delta ** (2 * params.hurst) * s


def test_f_bm_at_zero():
    expected = (1 - math.exp(-2)) / 2 / (1 - math.exp(-1)) ** 2
    assert f_bm(0.0, 1.0, 1.0) == pytest.approx(expected, rel=1e-14)


def test_f_bm_even_and_positive():
    lam = np.linspace(-math.pi, math.pi, 101)
    v = f_bm(lam, 1.3, 0.2)
    assert np.all(v > 0)
    assert np.array_equal(v, f_bm(-lam, 1.3, 0.2))


def test_f_bm_matches_ar1():
    alpha, delta, lam = 1.0, 0.03125, math.pi
    phi = math.exp(-alpha * delta)
    innov = (1 - phi ** 2) / (2 * alpha)
    ar1 = innov / (1 - 2 * phi * math.cos(lam) + phi ** 2)
    assert f_bm(lam, alpha, delta) == pytest.approx(ar1, rel=1e-13)


def test_f_frac_zero_sigma():
    lam = np.linspace(0.1, 3, 7)
    assert np.all(f_frac(lam, ModelParams.brownian_only(0.8, 1.0), DELTA) == 0)


def test_f_frac_even():
    lam = np.linspace(0.01, math.pi, 50)
    assert np.array_equal(f_frac(lam, P, DELTA), f_frac(-lam, P, DELTA))


@pytest.mark.parametrize("lam", [0.1, 1.0, 3.0])
def test_f_frac_against_brute_force(lam):
    got = f_frac(lam, P, DELTA)
    ref = brute_frac(lam, P, DELTA)
    # the brute-force sum itself drops a tail of relative size ~1e-9 near pi
    tol = 1e-10 if lam < 1 else 1e-8
    assert got == pytest.approx(ref, rel=tol)


@pytest.mark.parametrize("lam", [1e-3, 0.05, 1.0, 3.1])
@pytest.mark.parametrize("hurst", [0.3, 0.6, 0.8, 0.95])
def test_doubling_k_max(lam, hurst):
    p = ModelParams(1.0, hurst, 1.0)
    a = f_frac(lam, p, DELTA, FractionalSumConfig(2000))
    b = f_frac(lam, p, DELTA, FractionalSumConfig(4000))
    assert abs(a / b - 1) < 1e-10


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        f_frac(0.5, ModelParams(1.0, 0.55, 1.0), DELTA, FractionalSumConfig(8, False))


def test_singularity_at_zero():
    with pytest.raises(SingularityError):
        eval_symbol(np.array([0.0, 0.1]), P, DELTA)
    with pytest.warns(RemovablePointWarning):
        ev = eval_symbol(0.0, ModelParams(1.0, 0.3, 1.0), DELTA)
    assert np.isfinite(ev.f_total)


def test_symbol_invariants():
    lam = np.linspace(-math.pi, math.pi, 101)
    lam = lam[lam != 0]
    for p in (P, ModelParams(0.7, 0.6, 2.0), ModelParams(2.0, 0.2, 0.5)):
        ev = eval_symbol(lam, p, DELTA)
        assert np.allclose(ev.f_total, ev.f_frac + ev.f_bm, rtol=1e-14, atol=0)
        assert np.allclose(ev.d_sigma, 2 / p.sigma * ev.f_frac, rtol=1e-14, atol=0)
        split = p.sigma * math.log(DELTA) * ev.d_sigma + ev.r_remainder
        assert np.all(np.abs(ev.d_hurst - split) <= 1e-12 * np.abs(ev.d_hurst))
        assert np.array_equal(ev.f_total, eval_symbol(-lam, p, DELTA).f_total)


def test_d_sigma_is_twice_frac_at_unit_sigma():
    ev = eval_symbol(np.array([0.2, 2.0]), P, DELTA)
    assert np.allclose(ev.d_sigma, 2 * ev.f_frac, rtol=1e-15)


def _fd(param_idx, lam, p, delta, step=1e-6):
    th = p.as_array()
    h = step * abs(th[param_idx])
    up, dn = th.copy(), th.copy()
    up[param_idx] += h
    dn[param_idx] -= h
    fu = eval_symbol(lam, ModelParams(*up), delta).f_total
    fd = eval_symbol(lam, ModelParams(*dn), delta).f_total
    return (fu - fd) / (2 * h)


@pytest.mark.parametrize("lam", [0.05, 0.5, 3.0])
def test_derivatives_finite_difference(lam):
    ev = eval_symbol(lam, P, DELTA)
    for idx, field in enumerate(("d_sigma", "d_hurst", "d_alpha")):
        assert getattr(ev, field) == pytest.approx(_fd(idx, lam, P, DELTA), rel=1e-5)


def test_derivatives_random_points():
    rng = np.random.default_rng(4)
    for _ in range(10):
        h = rng.choice([rng.uniform(0.05, 0.45), rng.uniform(0.55, 0.95)])
        p = ModelParams(rng.uniform(0.3, 3), h, rng.uniform(0.2, 4))
        delta = 10 ** rng.uniform(-3, -0.5)
        lam = rng.uniform(0.01, math.pi)
        ev = eval_symbol(lam, p, delta)
        for idx, field in enumerate(("d_sigma", "d_hurst", "d_alpha")):
            assert getattr(ev, field) == pytest.approx(_fd(idx, lam, p, delta), rel=1e-5)


def test_g_sigma_bounds():
    lam = np.linspace(1e-4, math.pi, 1000)
    for s in (0.5, 1.0, 3.0):
        g, _, _ = symbol_ratios(lam, ModelParams(s, 0.8, 1.0), DELTA)
        assert np.all(g >= 0) and np.all(g <= 2 / s)


def test_g_sigma_saturates():
    p = ModelParams(200.0, 0.8, 1.0)
    ev = eval_symbol(1.0, p, DELTA)
    assert ev.f_frac / ev.f_bm > 100
    g, _, _ = symbol_ratios(1.0, p, DELTA)
    assert g == pytest.approx(2 / p.sigma, rel=0.01)


def test_g_alpha_low_frequency_limit():
    delta = 2.0 ** -10
    _, _, ga = symbol_ratios(delta * 1.0, P, delta)
    assert ga == pytest.approx(-1.0, rel=0.02)


def test_limit_profiles():
    prof = limit_profiles(P, j_integrals(P)[3])
    assert prof.w(0.0) == 1.0
    u = np.linspace(0, 50, 500)
    w = prof.w(u)
    assert np.all(np.diff(w) < 0) and np.all((w >= 0) & (w <= 1))
    assert np.array_equal(prof.w(-u), w)
    assert prof.q_alpha(0.0) == -2.0
    assert np.all(prof.q_alpha(u) < 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        half = sum(integrate.quad(lambda v: prof.w(v) ** 2, a, b, epsrel=1e-13, limit=500)[0]
                   for a, b in [(0, 1), (1, 1e3), (1e3, np.inf)])
    assert 2 * half == pytest.approx(j_integrals(P)[0], rel=1e-8)


@pytest.mark.parametrize("hurst", [0.3, 0.6, 0.8, 0.95])
@pytest.mark.parametrize("lam", [0.1, 3.0])
def test_aliasing_sums_against_mpmath(hurst, lam):
    import mpmath

    from mfou_lan.spectral import aliasing_sums

    mpmath.mp.dps = 25
    a, c = 1 - 2 * hurst, 1 / 32

    def term(k):
        x = lam + 2 * mpmath.pi * k
        return abs(x) ** a / (c * c + x * x)

    def dterm(k):
        return -2 * mpmath.log(abs(lam + 2 * mpmath.pi * k)) * term(k)

    def two_sided(f):
        em = dict(method="euler-maclaurin")
        return f(0) + mpmath.nsum(f, [1, mpmath.inf], **em) + mpmath.nsum(lambda k: f(-k), [1, mpmath.inf], **em)

    s0, s1, _, rel = aliasing_sums(np.array([lam]), hurst, c)
    assert s0[0] == pytest.approx(float(two_sided(term)), rel=1e-13)
    assert s1[0] == pytest.approx(float(two_sided(dterm)), rel=1e-11)
    assert rel[0] < 1e-12
