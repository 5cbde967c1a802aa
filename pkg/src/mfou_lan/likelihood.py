"""Exact Gaussian likelihood, scores as quadratic forms, the two score
projections and the LAN expansion checker.

Every score is a centered quadratic form ``0.5 (z' M z - tr M)`` in the
whitened data ``z = L^{-1} x``. The three basic whitened matrices come from
the symbols d f / d sigma, the H-remainder symbol r and d f / d alpha:

* ``C``  sigma direction,
* ``D``  H direction after removing the explicit ``sigma log(delta)`` part,
* ``A``  alpha direction.

The projections ``D_perp = D - a C`` and ``A_perp = A - b_s C - b_H D_perp``
make the three matrices trace-orthogonal, so the projected scores are
exactly uncorrelated at every n. The scores are tied to the raw ones by a
unit lower-triangular matrix ``M``, and the local scaling is
``rate = sqrt(n delta) (M^T)^{-1}``. That scaling is not diagonal because the
H coordinate must move together with sigma to keep the leading term fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DomainError, InvariantViolation, RegimeError
from .model import (HurstRegime, LocalAlternative, ModelParams, SamplingScheme,
                    classify_regime, local_shift)
from .toeplitz import (DEFAULT_BUILD, BuildConfig, CholeskyFactor, ToeplitzMatrix,
                       WhitenedMatrix, cholesky, mfou_coefficients, op_norm, quad_form,
                       trace_product, whiten)

_LOG_2PI = math.log(2.0 * math.pi)
_IDENTITY_RTOL = 1e-10


@dataclass
class ScoreMatrices:
    c_sigma: WhitenedMatrix
    d_H: WhitenedMatrix
    a_alpha: WhitenedMatrix
    d_H_perp: Optional[WhitenedMatrix] = None
    a_alpha_perp: Optional[WhitenedMatrix] = None

    def named(self) -> dict:
        out = {"C_sigma": self.c_sigma, "D_H": self.d_H, "A_alpha": self.a_alpha}
        if self.d_H_perp is not None:
            out["D_H_perp"] = self.d_H_perp
            out["A_alpha_perp"] = self.a_alpha_perp
        return out

    def orthogonality_residuals(self) -> dict:
        """|tr(XY)| / (|X|_F |Y|_F) for the three pairs that must vanish."""
        c, d, a = self.c_sigma, self.d_H_perp, self.a_alpha_perp
        pairs = {"C_Dperp": (c, d), "Aperp_C": (a, c), "Aperp_Dperp": (a, d)}
        return {k: abs(trace_product(x, y)) / (x.frob * y.frob) for k, (x, y) in pairs.items()}


@dataclass(frozen=True)
class ProjectionCoeffs:
    a_n: float
    b_sigma_n: float
    b_H_n: float
    beta_n: float


@dataclass(frozen=True)
class TriangularTransform:
    m_matrix: np.ndarray
    rate: np.ndarray
    rate_inv: np.ndarray


@dataclass
class CentralSequence:
    """Projected scores; arrays carry a leading batch axis when several paths
    are scored at once."""

    xi: np.ndarray
    raw_scores: np.ndarray
    S_sigma: np.ndarray
    R_H: np.ndarray
    R_H_perp: np.ndarray
    S_alpha_perp: np.ndarray

    @property
    def S_H(self):
        return self.raw_scores[..., 1]

    @property
    def S_alpha(self):
        return self.raw_scores[..., 2]

    @property
    def components(self):
        return self.S_sigma, self.R_H, self.R_H_perp, self.S_alpha_perp


@dataclass
class LanCheckReport:
    llr_exact: np.ndarray
    llr_lan: np.ndarray
    remainder: np.ndarray
    s1_op: float
    s1_frob: float
    decomposition_gap_op: float
    decomposition_gap_frob: float
    logdet_remainder_bound: float
    half_tr_s1_sq: float = 0.0
    quadratic_term: float = 0.0
    theta_shifted: Optional[ModelParams] = None


def check_scheme(scheme: SamplingScheme):
    if scheme.delta >= 1.0:
        raise DomainError(f"mesh delta={scheme.delta} must be below 1")


# ---------------------------------------------------------------------------
# Likelihood

def covariance(params: ModelParams, scheme: SamplingScheme, cfg: BuildConfig = DEFAULT_BUILD):
    check_scheme(scheme)
    g = mfou_coefficients(params, scheme.delta, scheme.n, ("f_total",), cfg)["f_total"]
    t = ToeplitzMatrix(g)
    return t, cholesky(t, cfg.jitter)


def loglik_from_factor(x, chol: CholeskyFactor):
    z = chol.whiten_data(x)
    n = chol.n
    return -0.5 * (chol.log_det + np.sum(z * z, axis=-1)) - 0.5 * n * _LOG_2PI


def loglik(x, params: ModelParams, scheme: SamplingScheme, cfg: BuildConfig = DEFAULT_BUILD,
           chol: Optional[CholeskyFactor] = None):
    """Exact Gaussian log-density of one path (or each row of a 2-D array)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("data must be finite")
    if chol is None:
        _, chol = covariance(params, scheme, cfg)
    return loglik_from_factor(x, chol)


# ---------------------------------------------------------------------------
# Score matrices and projections

def _project(c: WhitenedMatrix, d: WhitenedMatrix, a: WhitenedMatrix, params, scheme):
    a_n = trace_product(c, d) / c.frob_sq
    d_perp = WhitenedMatrix(d.dense - a_n * c.dense)
    b_s = trace_product(a, c) / c.frob_sq
    b_h = trace_product(a, d_perp) / d_perp.frob_sq
    a_perp = a.dense - b_s * c.dense
    a_perp -= b_h * d_perp.dense
    beta = params.sigma * math.log(scheme.delta) + a_n
    return d_perp, WhitenedMatrix(a_perp), ProjectionCoeffs(a_n, b_s, b_h, beta)


def build_score_matrices(params: ModelParams, scheme: SamplingScheme,
                         cfg: BuildConfig = DEFAULT_BUILD, *, project: Optional[bool] = None,
                         chol: Optional[CholeskyFactor] = None):
    """Whitened score matrices and projection coefficients.

    Projections are formed by default only for H > 3/4; pass ``project``
    to override. Returns ``(mats, coeffs, chol)``; ``coeffs`` is None when
    no projection was formed.
    """
    check_scheme(scheme)
    regime = classify_regime(params)
    if project is None:
        project = regime is HurstRegime.SUPERCRITICAL
    fields = ("d_sigma", "r_remainder", "d_alpha") + (() if chol is not None else ("f_total",))
    coeffs = mfou_coefficients(params, scheme.delta, scheme.n, fields, cfg)
    if chol is None:
        chol = cholesky(ToeplitzMatrix(coeffs["f_total"]), cfg.jitter)
    c = whiten(ToeplitzMatrix(coeffs["d_sigma"]), chol)
    if c.frob_sq == 0.0:
        raise DomainError("tr(C_sigma^2) vanishes; sigma must be positive")
    d = whiten(ToeplitzMatrix(coeffs["r_remainder"]), chol)
    a = whiten(ToeplitzMatrix(coeffs["d_alpha"]), chol)
    mats = ScoreMatrices(c, d, a)
    pc = None
    if project:
        mats.d_H_perp, mats.a_alpha_perp, pc = _project(c, d, a, params, scheme)
    return mats, pc, chol


def triangular_transform(coeffs: ProjectionCoeffs, params: ModelParams,
                         scheme: SamplingScheme) -> TriangularTransform:
    vals = (coeffs.a_n, coeffs.b_sigma_n, coeffs.b_H_n, coeffs.beta_n)
    if not all(math.isfinite(v) for v in vals):
        raise DomainError("projection coefficients must be finite")
    m1 = np.eye(3)
    # beta_n - a_n is sigma log(delta); written this way so zero coefficients give M = I
    m1[1, 0] = -(coeffs.beta_n - coeffs.a_n)
    m2 = np.eye(3)
    m2[1, 0] = -coeffs.a_n
    m3 = np.eye(3)
    m3[2, 0] = -coeffs.b_sigma_n
    m3[2, 1] = -coeffs.b_H_n
    m = m3 @ m2 @ m1
    root = math.sqrt(scheme.t_horizon)
    rate_inv = m.T / root
    rate = root * np.linalg.inv(m.T)
    if np.max(np.abs(rate @ rate_inv - np.eye(3))) > 1e-12 * max(1.0, np.max(np.abs(m))) ** 2:
        raise InvariantViolation("rate matrix is not inverted by rate_inv")
    return TriangularTransform(m, rate, rate_inv)


def _half_q(mat: WhitenedMatrix, z):
    return 0.5 * quad_form(mat, z)


def raw_scores(x, mats: ScoreMatrices, chol: CholeskyFactor, params: ModelParams,
               scheme: SamplingScheme) -> np.ndarray:
    """(S_sigma, S_H, S_alpha) for one path or for each row of ``x``."""
    z = chol.whiten_data(x)
    s_sigma = _half_q(mats.c_sigma, z)
    r_h = _half_q(mats.d_H, z)
    s_h = params.sigma * math.log(scheme.delta) * s_sigma + r_h
    s_alpha = _half_q(mats.a_alpha, z)
    return np.stack([s_sigma, s_h, s_alpha], axis=-1)


def _check_identity(lhs, terms, what):
    lhs = np.asarray(lhs)
    scale = np.abs(lhs) + sum(np.abs(np.asarray(t)) for t in terms)
    resid = np.abs(lhs - sum(terms))
    if np.any(resid > _IDENTITY_RTOL * np.maximum(scale, 1e-300)):
        raise InvariantViolation(f"{what} identity violated (max residual {np.max(resid):.3g})")


def central_sequence(x, mats: ScoreMatrices, coeffs: ProjectionCoeffs, chol: CholeskyFactor,
                     params: ModelParams, scheme: SamplingScheme,
                     transform: Optional[TriangularTransform] = None) -> CentralSequence:
    if mats.d_H_perp is None or coeffs is None:
        raise RegimeError("the projected pipeline has not been built")
    z = chol.whiten_data(x)
    s_sigma = _half_q(mats.c_sigma, z)
    r_h = _half_q(mats.d_H, z)
    s_alpha = _half_q(mats.a_alpha, z)
    r_perp = _half_q(mats.d_H_perp, z)
    s_alpha_perp = _half_q(mats.a_alpha_perp, z)
    s_h = params.sigma * math.log(scheme.delta) * s_sigma + r_h
    raw = np.stack([s_sigma, s_h, s_alpha], axis=-1)

    _check_identity(s_h, [coeffs.beta_n * s_sigma, r_perp], "H-score")
    _check_identity(s_alpha, [coeffs.b_sigma_n * s_sigma, coeffs.b_H_n * r_perp, s_alpha_perp],
                    "alpha-score")
    if transform is None:
        transform = triangular_transform(coeffs, params, scheme)
    projected = np.stack([s_sigma, r_perp, s_alpha_perp], axis=-1)
    via_m = raw @ transform.m_matrix.T
    m = transform.m_matrix
    scale = np.abs(raw) @ np.abs(m).T + np.abs(projected)
    if np.any(np.abs(via_m - projected) > _IDENTITY_RTOL * np.maximum(scale, 1e-300)):
        raise InvariantViolation("triangular transform does not reproduce the projected scores")
    xi = projected / math.sqrt(scheme.t_horizon)
    return CentralSequence(xi, raw, s_sigma, r_h, r_perp, s_alpha_perp)


def finite_fisher(mats: ScoreMatrices, scheme: SamplingScheme) -> np.ndarray:
    """Exact covariance of the central sequence: tr(M_i M_j) / (2 n delta)
    over (C, D_perp, A_perp); the off-diagonal entries vanish up to rounding."""
    if mats.d_H_perp is None:
        raise RegimeError("the projected pipeline has not been built")
    ms = (mats.c_sigma, mats.d_H_perp, mats.a_alpha_perp)
    out = np.empty((3, 3))
    for i in range(3):
        out[i, i] = ms[i].frob_sq
        for j in range(i):
            out[i, j] = out[j, i] = trace_product(ms[i], ms[j])
    return out / (2.0 * scheme.t_horizon)


def opf_diagnostics(mats: ScoreMatrices, tol: float = 1e-6, max_iter: int = 500) -> dict:
    """Operator-to-Frobenius norm ratio of each score matrix, with the
    Lanczos convergence flag."""
    out = {}
    for name, m in mats.named().items():
        val, conv = op_norm(m, tol, max_iter)
        out[name] = {"ratio": val / m.frob, "converged": conv, "op_norm": val}
    return out


# ---------------------------------------------------------------------------
# Bundled pipeline

@dataclass
class ScoreModel:
    """Everything built once per (theta, scheme) and reused across paths."""

    params: ModelParams
    scheme: SamplingScheme
    cfg: BuildConfig
    chol: CholeskyFactor
    mats: ScoreMatrices
    coeffs: Optional[ProjectionCoeffs] = None
    transform: Optional[TriangularTransform] = None
    _fisher: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def projected(self) -> bool:
        return self.coeffs is not None

    def fisher(self) -> np.ndarray:
        if self._fisher is None:
            self._fisher = finite_fisher(self.mats, self.scheme)
        return self._fisher

    def loglik(self, x):
        return loglik_from_factor(np.asarray(x, dtype=float), self.chol)

    def raw_scores(self, x):
        return raw_scores(x, self.mats, self.chol, self.params, self.scheme)

    def central_sequence(self, x) -> CentralSequence:
        return central_sequence(x, self.mats, self.coeffs, self.chol, self.params,
                                self.scheme, self.transform)


def build_model(params: ModelParams, scheme: SamplingScheme, cfg: BuildConfig = DEFAULT_BUILD,
                *, project: Optional[bool] = None) -> ScoreModel:
    mats, coeffs, chol = build_score_matrices(params, scheme, cfg, project=project)
    transform = triangular_transform(coeffs, params, scheme) if coeffs is not None else None
    return ScoreModel(params, scheme, cfg, chol, mats, coeffs, transform)


# ---------------------------------------------------------------------------
# LAN check

def lan_check(x, params: ModelParams, scheme: SamplingScheme, h, cfg: BuildConfig = DEFAULT_BUILD,
              *, model: Optional[ScoreModel] = None, norms: bool = True) -> LanCheckReport:
    """Compare the exact log-likelihood ratio at theta + rate^{-1} h with its
    LAN quadratic ``h' Xi - h' I h / 2`` built from the finite-n information.

    ``x`` may hold several paths as rows; the norm diagnostics are shared.
    """
    if not isinstance(h, LocalAlternative):
        h = LocalAlternative(tuple(h))
    if model is None:
        model = build_model(params, scheme, cfg, project=True)
    if not model.projected:
        raise RegimeError("lan_check needs the projected pipeline")
    x = np.asarray(x, dtype=float)
    hv = h.as_array()
    batch = x.shape[:-1]
    if not np.any(hv):
        zero = np.zeros(batch)
        return LanCheckReport(zero, zero.copy(), zero.copy(), 0.0, 0.0, 0.0, 0.0, 0.0,
                              0.0, 0.0, params)
    theta_h = local_shift(params, h, model.transform.rate_inv)
    t_h, chol_h = covariance(theta_h, scheme, model.cfg)
    llr_exact = loglik_from_factor(x, chol_h) - model.loglik(x)

    cs = model.central_sequence(x)
    fisher = model.fisher()
    quad = float(hv @ fisher @ hv)
    llr_lan = cs.xi @ hv - 0.5 * quad

    root = math.sqrt(scheme.t_horizon)
    mats = model.mats
    s1 = (hv[0] * mats.c_sigma.dense + hv[1] * mats.d_H_perp.dense
          + hv[2] * mats.a_alpha_perp.dense) / root
    s1w = WhitenedMatrix(s1)
    half_tr = 0.5 * s1w.frob_sq
    s1_op = s1_frob = gap_op = gap_frob = bound = float("nan")
    if norms:
        g = mfou_coefficients(params, scheme.delta, scheme.n, ("f_total",), model.cfg)["f_total"]
        diff = ToeplitzMatrix(t_h.first_row - g)
        s_full = whiten(diff, model.chol)
        s_op, _ = op_norm(s_full, model.cfg.lanczos_tol, model.cfg.lanczos_max_iter)
        s1_op, _ = op_norm(s1w, model.cfg.lanczos_tol, model.cfg.lanczos_max_iter)
        s1_frob = s1w.frob
        gap = WhitenedMatrix(s_full.dense - s1)
        gap_op, _ = op_norm(gap, model.cfg.lanczos_tol, model.cfg.lanczos_max_iter)
        gap_frob = gap.frob
        bound = s_op * s_full.frob_sq
    return LanCheckReport(llr_exact, llr_lan, llr_exact - llr_lan, s1_op, s1_frob, gap_op,
                          gap_frob, bound, half_tr, quad, theta_h)


# ---------------------------------------------------------------------------
# Other regimes

@dataclass
class RegimeScores:
    """Scores normalized for the regime: ``vector`` holds
    (S_sigma / v, R_H / v, S_alpha / sqrt(n delta)), where v = sqrt(n) delta**p
    for 1/2 < H < 3/4 and v = sqrt(n) for H < 1/2."""

    vector: np.ndarray
    raw_scores: np.ndarray
    R_H: np.ndarray
    normalization: np.ndarray
    block: np.ndarray
    alpha_entry: float
    cross_sigma_alpha: float
    cross_H_alpha: float
    c_tilde_sq_over_n: float


def regime_scale(params: ModelParams, scheme: SamplingScheme) -> float:
    regime = classify_regime(params)
    if regime is HurstRegime.SUPERCRITICAL:
        raise RegimeError("regime scores cover H < 3/4 only")
    if regime is HurstRegime.SUBCRITICAL_LONG_MEMORY:
        return math.sqrt(scheme.n) * scheme.delta ** params.rho
    return math.sqrt(scheme.n)


def regime_summary(mats: ScoreMatrices, params: ModelParams, scheme: SamplingScheme) -> dict:
    """Normalized trace quantities that govern the (sigma, H, alpha) limits."""
    v = regime_scale(params, scheme)
    c, d, a = mats.c_sigma, mats.d_H, mats.a_alpha
    t_cd = trace_product(c, d)
    block = 0.5 * np.array([[c.frob_sq, t_cd], [t_cd, d.frob_sq]]) / v ** 2
    root = math.sqrt(scheme.t_horizon)
    return {
        "v_n": v,
        "block": block,
        "block_det": float(np.linalg.det(block)),
        "alpha_entry": a.frob_sq / (2.0 * scheme.t_horizon),
        "cross_sigma_alpha": trace_product(c, a) / (v * root),
        "cross_H_alpha": trace_product(d, a) / (v * root),
        "c_tilde_sq_over_n": c.frob_sq / (4.0 * params.sigma ** 2 * scheme.n),
    }


def regime_scores(x, params: ModelParams, scheme: SamplingScheme,
                  cfg: BuildConfig = DEFAULT_BUILD, *,
                  model: Optional[ScoreModel] = None) -> RegimeScores:
    """Scores with only the explicit sigma log(delta) term removed, normalized
    by diag(v, v, sqrt(n delta))."""
    v = regime_scale(params, scheme)
    if model is None:
        model = build_model(params, scheme, cfg, project=False)
    raw = model.raw_scores(x)
    z = model.chol.whiten_data(x)
    r_h = _half_q(model.mats.d_H, z)
    _check_identity(raw[..., 1], [params.sigma * math.log(scheme.delta) * raw[..., 0], r_h],
                    "H-score")
    norm = np.array([v, v, math.sqrt(scheme.t_horizon)])
    vec = np.stack([raw[..., 0], r_h, raw[..., 2]], axis=-1) / norm
    s = regime_summary(model.mats, params, scheme)
    return RegimeScores(vec, raw, r_h, norm, s["block"], s["alpha_entry"],
                        s["cross_sigma_alpha"], s["cross_H_alpha"], s["c_tilde_sq_over_n"])
