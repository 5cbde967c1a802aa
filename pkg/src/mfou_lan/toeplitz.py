"""Toeplitz matrices from spectral symbols, Cholesky whitening, and the trace,
norm and quadratic-form kernels used by the score machinery.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from ._quadrature import frequency_rule, geometric_tail, lower_cutoff
from .exceptions import DomainError, NotPositiveDefiniteError, QuadratureError
from .model import ModelParams, SamplingScheme
from .spectral import DEFAULT_SUM, FractionalSumConfig, eval_symbol


@dataclass(frozen=True)
class BuildConfig:
    """Numerical settings shared by every covariance and score-matrix build."""

    sum_cfg: FractionalSumConfig = DEFAULT_SUM
    quad_tol: float = 1e-12
    quad_order: int = 20
    max_level: int = 3
    jitter: float = 1e-12
    lanczos_tol: float = 1e-6
    lanczos_max_iter: int = 500

    def __post_init__(self):
        if not self.quad_tol > 0:
            raise DomainError("quad_tol must be positive")


DEFAULT_BUILD = BuildConfig()


@dataclass
class AutocovSequence:
    """Lags 0..n-1 of a covariance sequence and its quadrature error target."""

    gamma: np.ndarray
    source_tol: float
    abs_error: float = 0.0

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        g0 = self.gamma[0]
        if not g0 > 0:
            raise DomainError("gamma[0] must be positive")
        if np.any(np.abs(self.gamma) > g0 * (1 + 1e-12)):
            raise DomainError("sequence is not a valid autocovariance (|gamma[j]| > gamma[0])")

    @property
    def n(self) -> int:
        return self.gamma.size


@dataclass
class ToeplitzMatrix:
    first_row: np.ndarray
    _dense: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.first_row)

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = sla.toeplitz(np.asarray(self.first_row, dtype=float))
        return self._dense

    def release(self):
        self._dense = None


@dataclass
class CholeskyFactor:
    lower: np.ndarray
    log_det: float

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def whiten_data(self, x) -> np.ndarray:
        """z = L^{-1} x for a vector or for the rows of a 2-D array."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DomainError(f"data length {x.shape[-1]} does not match n={self.n}")
        z = sla.solve_triangular(self.lower, x.T, lower=True, check_finite=False)
        return z.T


@dataclass
class WhitenedMatrix:
    """Symmetric matrix L^{-1} T L^{-T} with cached trace and Frobenius norm."""

    dense: np.ndarray
    trace: float = field(init=False)
    frob_sq: float = field(init=False)
    op_norm_est: Optional[float] = None
    op_norm_converged: bool = False

    def __post_init__(self):
        self.trace = float(np.trace(self.dense))
        self.frob_sq = float(np.vdot(self.dense, self.dense))

    @property
    def n(self) -> int:
        return self.dense.shape[0]

    @property
    def frob(self) -> float:
        return math.sqrt(self.frob_sq)


# ---------------------------------------------------------------------------
# Fourier coefficients of symbols

def _cosine_sums(lam, weighted, n):
    """(1/pi) sum_i weighted[:, i] cos(j lam_i) for j = 0..n-1."""
    j = np.arange(n, dtype=float)
    flat = lam < 1e-9 / max(n, 1)
    out = np.repeat(weighted[:, flat].sum(axis=1)[:, None], n, axis=1)
    osc_lam = lam[~flat]
    osc_w = weighted[:, ~flat]
    chunk = max(256, 8_000_000 // max(n, 1))
    for i in range(0, osc_lam.size, chunk):
        c = np.cos(np.multiply.outer(osc_lam[i:i + chunk], j))
        out += osc_w[:, i:i + chunk] @ c
    return out / math.pi


def fourier_coefficients(symbol: Callable, n: int, tol: float = 1e-12, *,
                         lam_min: Optional[float] = None, order: int = 20,
                         max_level: int = 3, n_uniform: Optional[int] = None):
    """Cosine coefficients (1/2pi) int g(lambda) cos(j lambda) over [-pi, pi]
    for j < n, for one or several even symbols at once.

    ``symbol`` maps an array of positive frequencies to an array of shape
    ``(k, m)`` (or ``(m,)``). The rule is refined until two successive levels
    agree to ``tol`` times each symbol's scale (``|gamma_0|`` or, for
    sign-changing symbols, the L1 mass). Returns ``(coeffs, abs_err)`` with
    ``coeffs`` of shape ``(k, n)``.
    """
    if n < 1:
        raise DomainError("n must be positive")
    if lam_min is None:
        lam_min = 1e-14 / max(n, 1)
    if n_uniform is None:
        n_uniform = max(16, int(math.ceil(n / 4)))
    prev = None
    for level in range(max_level + 1):
        lam, w, _ = frequency_rule(n_uniform, lam_min, level, order)
        vals = np.atleast_2d(np.asarray(symbol(lam), dtype=float))
        weighted = vals * w[None, :]
        coeffs = _cosine_sums(lam, weighted, n)
        first = weighted[:, :order].sum(axis=1)
        second = weighted[:, order:2 * order].sum(axis=1)
        coeffs += geometric_tail(first, second)[:, None] / math.pi
        scale = np.maximum(np.abs(coeffs[:, 0]), np.abs(weighted).sum(axis=1) / math.pi)
        if prev is not None:
            err = np.max(np.abs(coeffs - prev), axis=1)
            if np.all(err <= tol * scale):
                return coeffs, err
        prev = coeffs
    raise QuadratureError(
        f"Fourier coefficients did not reach tol={tol:g} within {max_level} refinements "
        f"(relative discrepancy {np.max(err / scale):.3g})")


def autocov_from_symbol(symbol: Callable, n: int, tol: float = 1e-12, **kw) -> AutocovSequence:
    """Autocovariance sequence of a single even spectral density."""
    coeffs, err = fourier_coefficients(lambda lam: np.atleast_2d(symbol(lam)), n, tol, **kw)
    return AutocovSequence(coeffs[0], tol, float(err[0]))


_SYMBOL_FIELDS = ("f_total", "f_frac", "f_bm", "d_sigma", "d_hurst", "d_alpha", "r_remainder")


def mfou_coefficients(params: ModelParams, delta: float, n: int,
                      fields: Sequence[str] = ("f_total",),
                      cfg: BuildConfig = DEFAULT_BUILD) -> dict:
    """Fourier coefficients (lags 0..n-1) of the requested symbol fields."""
    for f in fields:
        if f not in _SYMBOL_FIELDS:
            raise DomainError(f"unknown symbol field {f!r}")

    def symbol(lam):
        ev = eval_symbol(lam, params, delta, cfg.sum_cfg)
        return np.stack([getattr(ev, f) for f in fields])

    lam_min = lower_cutoff(params.hurst, min(delta, 1.0 / n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        coeffs, err = fourier_coefficients(symbol, n, cfg.quad_tol, lam_min=lam_min,
                                           order=cfg.quad_order, max_level=cfg.max_level)
    return {f: coeffs[i] for i, f in enumerate(fields)}


def mfou_autocov(params: ModelParams, scheme: SamplingScheme,
                 cfg: BuildConfig = DEFAULT_BUILD) -> AutocovSequence:
    g = mfou_coefficients(params, scheme.delta, scheme.n, ("f_total",), cfg)["f_total"]
    return AutocovSequence(g, cfg.quad_tol)


# ---------------------------------------------------------------------------
# Dense linear algebra

def cholesky(t, jitter: float = 1e-12) -> CholeskyFactor:
    """Cholesky factor of a symmetric positive definite matrix, retrying once
    with ``jitter * t[0, 0]`` added to the diagonal."""
    a = t.dense if isinstance(t, ToeplitzMatrix) else np.asarray(t, dtype=float)
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        bump = jitter * a[0, 0]
        try:
            low = np.linalg.cholesky(a + bump * np.eye(a.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                "covariance is not positive definite even after jitter; "
                "try a tighter quadrature tolerance") from exc
    d = np.diagonal(low)
    if not np.all(d > 0):
        raise NotPositiveDefiniteError("Cholesky factor has a non-positive diagonal")
    return CholeskyFactor(low, float(2.0 * np.sum(np.log(d))))


def build_sigma(params: ModelParams, scheme: SamplingScheme,
                cfg: BuildConfig = DEFAULT_BUILD):
    """Toeplitz covariance of n consecutive observations and its Cholesky factor."""
    seq = mfou_autocov(params, scheme, cfg)
    t = ToeplitzMatrix(seq.gamma)
    return t, cholesky(t, cfg.jitter)


def whiten(t, chol: CholeskyFactor) -> WhitenedMatrix:
    """L^{-1} T L^{-T}: congruent to Sigma^{-1/2} T Sigma^{-1/2}, same spectrum."""
    a = t.dense if isinstance(t, ToeplitzMatrix) else np.asarray(t, dtype=float)
    if a.shape != chol.lower.shape:
        raise DomainError("matrix and factor dimensions differ")
    low = chol.lower
    if not np.all(np.diagonal(low) > 0):
        raise NotPositiveDefiniteError("singular Cholesky factor")
    w = sla.solve_triangular(low, np.array(a, order="F"), lower=True,
                             overwrite_b=True, check_finite=False)
    w = sla.solve_triangular(low, np.asfortranarray(w.T), lower=True,
                             overwrite_b=True, check_finite=False)
    w = np.ascontiguousarray(w)
    w += w.T
    w *= 0.5
    return WhitenedMatrix(w)


def _dense(a):
    return a.dense if isinstance(a, WhitenedMatrix) else np.asarray(a, dtype=float)


def trace_product(a, b) -> float:
    """tr(AB) for symmetric A, B as the sum of elementwise products."""
    a, b = _dense(a), _dense(b)
    if a.shape != b.shape:
        raise DomainError("dimension mismatch")
    return float(np.vdot(a, b))


def op_norm(a, tol: float = 1e-6, max_iter: int = 500):
    """Largest absolute eigenvalue of a symmetric matrix by implicitly
    restarted Lanczos. Returns ``(value, converged)``; on non-convergence the
    best Ritz estimate is returned with ``converged`` false.
    """
    m = _dense(a)
    n = m.shape[0]
    if n <= 2:
        val, conv = float(np.max(np.abs(np.linalg.eigvalsh(m)))), True
    else:
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            vals = eigsh(m, k=1, which="LM", tol=tol, maxiter=max_iter, v0=v0,
                         return_eigenvectors=False)
            val, conv = float(np.abs(vals[0])), True
        except ArpackNoConvergence as exc:
            ev = exc.eigenvalues
            if len(ev):
                val = float(np.max(np.abs(ev)))
            else:
                x = m @ v0
                val = float(np.linalg.norm(x) / np.linalg.norm(v0))
            conv = False
    if isinstance(a, WhitenedMatrix):
        a.op_norm_est, a.op_norm_converged = val, conv
    return val, conv


def quad_form(a, z) -> np.ndarray | float:
    """Centered quadratic form z^T A z - tr(A), for one vector or rows of Z."""
    m = _dense(a)
    z = np.asarray(z, dtype=float)
    tr = a.trace if isinstance(a, WhitenedMatrix) else float(np.trace(m))
    if z.shape[-1] != m.shape[0]:
        raise DomainError("dimension mismatch")
    if z.ndim == 1:
        return float(z @ m @ z) - tr
    return np.einsum("ij,ij->i", z @ m, z) - tr


# ---------------------------------------------------------------------------
# Binary cache format: uint64 length, then little-endian float64 values

def dump_autocov(path, seq) -> None:
    g = np.asarray(seq.gamma if isinstance(seq, AutocovSequence) else seq, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", g.size))
        fh.write(g.tobytes())


def load_autocov(path, tol: float = float("nan")) -> AutocovSequence:
    with open(path, "rb") as fh:
        (size,) = struct.unpack("<Q", fh.read(8))
        g = np.frombuffer(fh.read(8 * size), dtype="<f8")
    if g.size != size:
        raise DomainError("truncated autocovariance file")
    return AutocovSequence(g.astype(float), tol)
