import math

import numpy as np
import pytest

from mfou_lan.exceptions import DomainError, InvariantViolation, RegimeError
from mfou_lan.likelihood import (ProjectionCoeffs, build_model, central_sequence, covariance,
                                 finite_fisher, lan_check, loglik, loglik_from_factor,
                                 opf_diagnostics, regime_scores, regime_summary,
                                 triangular_transform)
from mfou_lan.model import LocalAlternative, ModelParams, SamplingScheme, scheme_from_kappa
from mfou_lan.simulate import SimConfig, sample_paths
from mfou_lan.toeplitz import CholeskyFactor, op_norm, trace_product

P = ModelParams(1.0, 0.8, 1.0)


@pytest.fixture(scope="module")
def model256():
    return build_model(P, scheme_from_kappa(256, 0.5), project=True)


@pytest.fixture(scope="module")
def paths128(small_model):
    return sample_paths(128, 2000, SimConfig("cholesky", 99), chol=small_model.chol)


def test_loglik_white_noise_stub():
    x = np.array([0.3, -1.2, 2.0])
    chol = CholeskyFactor(np.eye(3), 0.0)
    assert loglik_from_factor(x, chol) == pytest.approx(-0.5 * x @ x - 1.5 * math.log(2 * math.pi))


def test_loglik_explicit_inverse(rng):
    s = scheme_from_kappa(16, 0.5)
    t, chol = covariance(P, s)
    x = rng.standard_normal(16)
    sig = t.dense
    ref = -0.5 * (np.linalg.slogdet(sig)[1] + x @ np.linalg.inv(sig) @ x) - 8 * math.log(2 * math.pi)
    assert loglik(x, P, s) == pytest.approx(ref, rel=1e-10)


def test_loglik_prefers_truth(small_model):
    s = small_model.scheme
    x = sample_paths(128, 100, SimConfig("cholesky", 5), chol=small_model.chol)
    far = ModelParams(2.0, 0.8, 1.0)
    assert np.mean(small_model.loglik(x)) > np.mean(loglik(x, far, s))


def test_loglik_rejects_nonfinite():
    with pytest.raises(DomainError):
        loglik(np.array([1.0, np.nan]), P, scheme_from_kappa(2, 0.5))


def test_mesh_above_one_rejected():
    with pytest.raises(DomainError):
        covariance(P, SamplingScheme(8, 1.5))


def test_orthogonality(model256):
    m = model256.mats
    for a, b in [(m.c_sigma, m.d_H_perp), (m.a_alpha_perp, m.c_sigma), (m.a_alpha_perp, m.d_H_perp)]:
        assert abs(trace_product(a, b)) <= 1e-8 * a.frob * b.frob
    assert all(v <= 1e-8 for v in m.orthogonality_residuals().values())


def test_c_sigma_op_norm_bound(model256):
    val, _ = op_norm(model256.mats.c_sigma, 1e-10)
    assert val <= 2 / P.sigma + 1e-8


def test_schur_identity(model256):
    m = model256.mats
    c, d, a = m.c_sigma, m.d_H_perp, m.a_alpha
    rhs = a.frob_sq - trace_product(a, c) ** 2 / c.frob_sq - trace_product(a, d) ** 2 / d.frob_sq
    assert m.a_alpha_perp.frob_sq == pytest.approx(rhs, rel=1e-8)


def test_scores_match_finite_differences(small_model, rng):
    s = small_model.scheme
    x = sample_paths(128, 3, SimConfig("cholesky", 17), chol=small_model.chol)
    raw = small_model.raw_scores(x)
    th = P.as_array()
    for i in range(3):
        h = 1e-5 * max(1.0, abs(th[i]))
        up, dn = th.copy(), th.copy()
        up[i] += h
        dn[i] -= h
        fd = (loglik(x, ModelParams(*up), s) - loglik(x, ModelParams(*dn), s)) / (2 * h)
        assert np.allclose(fd, raw[:, i], rtol=1e-4, atol=0)


def test_zero_data_scores(small_model):
    raw = small_model.raw_scores(np.zeros(128))
    m = small_model.mats
    s_sigma = -0.5 * m.c_sigma.trace
    expected = [s_sigma, P.sigma * math.log(small_model.scheme.delta) * s_sigma - 0.5 * m.d_H.trace,
                -0.5 * m.a_alpha.trace]
    assert np.allclose(raw, expected, rtol=1e-14)


def test_scores_centered(small_model, paths128):
    raw = small_model.raw_scores(paths128)
    se = raw.std(axis=0, ddof=1) / math.sqrt(raw.shape[0])
    assert np.all(np.abs(raw.mean(axis=0)) <= 3 * se)


def test_triangular_identities(small_model, paths128):
    cs = small_model.central_sequence(paths128[:50])
    k = small_model.coeffs
    assert np.allclose(cs.S_H, k.beta_n * cs.S_sigma + cs.R_H_perp, rtol=1e-10, atol=0)
    assert np.allclose(cs.S_alpha, k.b_sigma_n * cs.S_sigma + k.b_H_n * cs.R_H_perp + cs.S_alpha_perp,
                       rtol=1e-10, atol=1e-10 * np.abs(cs.S_alpha).max())
    root = math.sqrt(small_model.scheme.t_horizon)
    assert np.allclose(cs.xi, np.stack([cs.S_sigma, cs.R_H_perp, cs.S_alpha_perp], axis=1) / root)
    m = small_model.transform.m_matrix
    assert np.allclose(cs.raw_scores @ m[1], cs.R_H_perp, rtol=1e-10)


def test_identity_violation_detected(small_model, paths128):
    k = small_model.coeffs
    bad = ProjectionCoeffs(k.a_n, k.b_sigma_n, k.b_H_n, k.beta_n + 0.1)
    with pytest.raises(InvariantViolation):
        central_sequence(paths128[:5], small_model.mats, bad, small_model.chol, P, small_model.scheme)


def test_projection_coefficients(small_model):
    k = small_model.coeffs
    assert k.beta_n - k.a_n == pytest.approx(P.sigma * math.log(small_model.scheme.delta), rel=1e-14)


def test_central_sequence_uncorrelated(small_model, paths128):
    xi = small_model.central_sequence(paths128).xi
    corr = np.corrcoef(xi, rowvar=False)
    assert np.max(np.abs(corr[np.triu_indices(3, 1)])) <= 3 / math.sqrt(2000)


def test_transform_with_zero_coefficients():
    s = scheme_from_kappa(64, 0.5)
    t = triangular_transform(ProjectionCoeffs(0.0, 0.0, 0.0, 0.0), P, s)
    assert np.array_equal(t.m_matrix, np.eye(3))
    assert np.allclose(t.rate, math.sqrt(s.t_horizon) * np.eye(3), rtol=1e-15)


def test_transform_structure(small_model):
    t = small_model.transform
    m = t.m_matrix
    assert np.allclose(np.diag(m), 1) and np.all(np.triu(m, 1) == 0)
    assert np.allclose(t.rate @ t.rate_inv, np.eye(3), atol=1e-12)
    h = np.array([0.3, -0.7, 0.9])
    root = math.sqrt(small_model.scheme.t_horizon)
    assert (t.rate_inv @ h)[2] == 0.9 / root
    k = small_model.coeffs
    m1, m2, m3 = np.eye(3), np.eye(3), np.eye(3)
    m1[1, 0] = -P.sigma * math.log(small_model.scheme.delta)
    m2[1, 0] = -k.a_n
    m3[2, :2] = [-k.b_sigma_n, -k.b_H_n]
    assert np.allclose(m, m3 @ m2 @ m1, rtol=1e-12)


def test_finite_fisher_diagonal(small_model):
    f = finite_fisher(small_model.mats, small_model.scheme)
    off = f[np.triu_indices(3, 1)]
    assert np.all(np.abs(off) <= 1e-8 * np.max(np.diag(f)))
    m = small_model.mats
    t = small_model.scheme.t_horizon
    assert f[0, 0] == pytest.approx(m.c_sigma.frob_sq / (2 * t))
    assert f[2, 2] == pytest.approx(m.a_alpha_perp.frob_sq / (2 * t))


def test_finite_fisher_trends(sweep):
    from mfou_lan.fisher import constants_supercritical
    c = constants_supercritical(P)
    g33 = [abs(r["finite_n_cov"][2, 2] / c.I_aa_perp - 1) for r in sweep]
    g11 = [abs(r["finite_n_cov"][0, 0] / c.I_ss - 1) for r in sweep]
    assert all(b < a for a, b in zip(g33, g33[1:]))
    assert all(b < a for a, b in zip(g11, g11[1:]))


def test_lan_check_zero(small_model):
    x = np.ones((2, 128))
    rep = lan_check(x, P, small_model.scheme, (0, 0, 0), model=small_model)
    assert np.all(rep.remainder == 0) and np.all(rep.llr_exact == 0)


def test_lan_check_quadratic_identity(small_model, paths128):
    h = LocalAlternative((0.6, 0.0, 0.8))
    rep = lan_check(paths128[:20], P, small_model.scheme, h, model=small_model)
    assert rep.half_tr_s1_sq == pytest.approx(rep.quadratic_term, rel=1e-10)
    assert np.array_equal(rep.remainder, rep.llr_exact - rep.llr_lan)
    assert rep.s1_frob > 0 and rep.s1_op <= rep.s1_frob
    assert rep.logdet_remainder_bound > 0


def test_lan_check_out_of_domain(small_model):
    with pytest.raises(DomainError):
        lan_check(np.zeros(128), P, small_model.scheme, (-1e4, 0, 0), model=small_model)


def test_opf(small_model):
    o = opf_diagnostics(small_model.mats)
    assert set(o) == {"C_sigma", "D_H", "D_H_perp", "A_alpha", "A_alpha_perp"}
    assert all(0 < v["ratio"] <= 1 and v["converged"] for v in o.values())


@pytest.mark.parametrize("h", [0.6, 0.3])
def test_regime_scores(h):
    p = ModelParams(1.0, h, 1.0)
    s = scheme_from_kappa(128, 0.5)
    model = build_model(p, s)
    assert not model.projected
    x = sample_paths(128, 10, SimConfig("cholesky", 3), chol=model.chol)
    rs = regime_scores(x, p, s, model=model)
    assert np.allclose(rs.raw_scores[:, 1], p.sigma * math.log(s.delta) * rs.raw_scores[:, 0] + rs.R_H,
                       rtol=1e-10)
    assert np.allclose(rs.vector * rs.normalization, np.stack(
        [rs.raw_scores[:, 0], rs.R_H, rs.raw_scores[:, 2]], axis=1))
    v = math.sqrt(128) * (s.delta ** p.rho if h > 0.5 else 1.0)
    assert rs.normalization[0] == pytest.approx(v)


def test_regime_scores_gate(small_model):
    with pytest.raises(RegimeError):
        regime_scores(np.zeros(128), P, small_model.scheme, model=small_model)


def test_short_memory_block_approaches_limit():
    from mfou_lan.fisher import constants_short_memory
    p = ModelParams(1.0, 0.3, 1.0)
    lim = constants_short_memory(p).block
    dist = []
    for n in (128, 256, 512, 1024):
        s = scheme_from_kappa(n, 0.5)
        dist.append(np.max(np.abs(regime_summary(build_model(p, s).mats, p, s)["block"] - lim)))
    assert all(b < a for a, b in zip(dist, dist[1:]))


def test_subcritical_cross_trace_decreasing():
    p = ModelParams(1.0, 0.6, 1.0)
    vals = []
    for n in (128, 256, 512, 1024):
        s = scheme_from_kappa(n, 0.5)
        vals.append(abs(regime_summary(build_model(p, s).mats, p, s)["cross_sigma_alpha"]))
    assert all(b < a for a, b in zip(vals, vals[1:]))
