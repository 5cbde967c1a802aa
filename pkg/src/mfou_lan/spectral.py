"""Sampled spectral density of the mixed fractional OU process and its
parameter derivatives.

The density at mesh ``delta`` splits into a fractional part, an aliasing sum
over ``lambda + 2 pi k``, and a Brownian part, which is the AR(1) density of
the sampled OU component. Everything here is vectorised over ``lambda``.

The aliasing sum is evaluated exactly for ``|k| <= _NEAR`` and through a
Chebyshev interpolant in ``lambda`` for the remaining terms (plus an
integral tail). Those terms are analytic on ``[-pi, pi]``, so the interpolant
reproduces the plain truncated sum to rounding error at a fraction of the
cost.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Chebyshev

from .exceptions import (DomainError, RegimeError, RemovablePointWarning,
                         SingularityError, TruncationWarning)
from .model import HurstRegime, ModelParams, classify_regime
from .special import digamma, gamma

_TWO_PI = 2.0 * math.pi
_NEAR = 32
_CHEB_DEG = 48


@dataclass(frozen=True)
class FractionalSumConfig:
    k_max: int = 2000
    tail_correction: bool = True
    rel_tol: float = 1e-10

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 8:
            raise DomainError("k_max must be an integer >= 8")
        if not 0.0 < self.rel_tol <= 1e-4:
            raise DomainError("rel_tol must lie in (0, 1e-4]")


DEFAULT_SUM = FractionalSumConfig()


@dataclass(frozen=True)
class SymbolEval:
    """Spectral density pieces and derivatives at a set of frequencies."""

    f_total: np.ndarray
    f_frac: np.ndarray
    f_bm: np.ndarray
    d_sigma: np.ndarray
    d_hurst: np.ndarray
    d_alpha: np.ndarray
    r_remainder: np.ndarray


def hurst_constant(hurst: float) -> float:
    """Gamma(2H+1) sin(pi H)."""
    return gamma(2.0 * hurst + 1.0) * math.sin(math.pi * hurst)


def hurst_log_derivative(hurst: float) -> float:
    """d/dH log(Gamma(2H+1) sin(pi H)) = 2 digamma(2H+1) + pi cot(pi H)."""
    return 2.0 * digamma(2.0 * hurst + 1.0) + math.pi / math.tan(math.pi * hurst)


def _terms(x, a, c):
    """Summands at ``x = lambda + 2 pi k``: the plain term, its H-derivative
    factor and its derivative in c = alpha * delta."""
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        pw = np.where(ax > 0, ax ** a, 0.0 if a > 0 else np.inf)
        den = c * c + x * x
        t0 = pw / den
        lg = np.where(ax > 0, np.log(np.where(ax > 0, ax, 1.0)), 0.0)
        t1 = -2.0 * lg * t0
        t2 = -2.0 * c * t0 / den
    return t0, t1, t2


_EM1 = _TWO_PI ** 2 / 24.0
_EM3 = 7.0 * _TWO_PI ** 4 / 5760.0


def _tail(lam, a, c, k_max):
    """Tail of the three sums over |k| > k_max: the integral from the midpoint
    A = 2 pi (k_max + 1/2) +- lambda, plus the first Euler-Maclaurin
    correction (2 pi / 24) f'(A). The error estimate is the size of the next
    correction term."""
    out0 = np.zeros_like(lam)
    out1 = np.zeros_like(lam)
    out2 = np.zeros_like(lam)
    err = np.zeros_like(lam)
    c2 = c * c
    s0, s1 = a - 2.0, a - 4.0
    for sign in (1.0, -1.0):
        A = _TWO_PI * (k_max + 0.5) + sign * lam
        logA = np.log(A)
        out0 += A ** (s0 + 1) / (-s0 - 1) - c2 * A ** (s1 + 1) / (-s1 - 1)

        def ilog(s):
            return A ** (s + 1) * (logA / (-s - 1) + 1.0 / (s + 1) ** 2)

        out1 += -2.0 * (ilog(s0) - c2 * ilog(s1))
        out2 += -2.0 * c * A ** (s1 + 1) / (-s1 - 1)
        # first-derivative corrections, in lambda units
        d0 = s0 * A ** (s0 - 1)
        out0 += _EM1 * d0
        out1 += _EM1 * -2.0 * (d0 * logA + A ** (s0 - 1))
        out2 += _EM1 * -2.0 * c * s1 * A ** (s1 - 1)
        err += _EM3 * (2.0 - a) * (3.0 - a) * (4.0 - a) * A ** (a - 5.0) * (1.0 + np.abs(logA))
    return out0 / _TWO_PI, out1 / _TWO_PI, out2 / _TWO_PI, err


def _direct_sums(lam, a, c, k_lo, k_hi):
    """Sum the three term families over lo <= |k| <= hi (both signs; k=0 once)."""
    lam = np.asarray(lam, dtype=float)
    flat = lam.reshape(-1)
    s0 = np.zeros_like(flat)
    s1 = np.zeros_like(flat)
    s2 = np.zeros_like(flat)
    ks = np.arange(k_lo, k_hi + 1, dtype=float)
    ks = np.concatenate([-ks[ks > 0][::-1], ks]) if k_lo == 0 else np.concatenate([-ks[::-1], ks])
    chunk = max(1, 2_000_000 // max(ks.size, 1))
    for i in range(0, flat.size, chunk):
        x = flat[i:i + chunk, None] + _TWO_PI * ks[None, :]
        t0, t1, t2 = _terms(x, a, c)
        s0[i:i + chunk] = t0.sum(axis=1)
        s1[i:i + chunk] = t1.sum(axis=1)
        s2[i:i + chunk] = t2.sum(axis=1)
    return s0.reshape(lam.shape), s1.reshape(lam.shape), s2.reshape(lam.shape)


@lru_cache(maxsize=256)
def _far_interpolants(a, c, k_max, tail):
    def far(lam):
        s = _direct_sums(lam, a, c, _NEAR + 1, k_max)
        if tail:
            t = _tail(lam, a, c, k_max)
            s = (s[0] + t[0], s[1] + t[1], s[2] + t[2])
        return np.stack(s)

    nodes = np.cos(np.pi * (np.arange(_CHEB_DEG + 1) + 0.5) / (_CHEB_DEG + 1)) * math.pi
    vals = far(nodes)
    return tuple(Chebyshev.fit(nodes, v, _CHEB_DEG, domain=[-math.pi, math.pi]) for v in vals)


def aliasing_sums(lam, hurst: float, c: float, cfg: FractionalSumConfig = DEFAULT_SUM):
    """Return (S, dS/dH, dS/dc) for S = sum_k |x|^(1-2H) / (c^2 + x^2).

    Also returns the relative truncation-error estimate. ``lam`` must lie
    in [-pi, pi].
    """
    # the sum is even in lambda; folding makes the evaluator exactly even
    lam = np.abs(np.asarray(lam, dtype=float))
    a = 1.0 - 2.0 * hurst
    K = int(cfg.k_max)
    if K <= _NEAR:
        s0, s1, s2 = _direct_sums(lam, a, c, 0, K)
        if cfg.tail_correction:
            t = _tail(lam, a, c, K)
            s0, s1, s2 = s0 + t[0], s1 + t[1], s2 + t[2]
    else:
        s0, s1, s2 = _direct_sums(lam, a, c, 0, _NEAR)
        p0, p1, p2 = _far_interpolants(a, float(c), K, bool(cfg.tail_correction))
        s0, s1, s2 = s0 + p0(lam), s1 + p1(lam), s2 + p2(lam)
    t0, _, _, terr = _tail(lam, a, c, K)
    err = terr if cfg.tail_correction else t0
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(s0 > 0, err / s0, 0.0)
    return s0, s1, s2, rel


def _check_lambda(lam, params: ModelParams):
    lam = np.asarray(lam, dtype=float)
    if np.any(np.abs(lam) > math.pi * (1 + 1e-12)):
        raise DomainError("lambda must lie in [-pi, pi]")
    if np.any(lam == 0.0):
        if params.hurst > 0.5:
            raise SingularityError("the fractional symbol diverges at lambda = 0 for H > 1/2")
        warnings.warn("lambda = 0 is a removable point of the symbol for H < 1/2",
                      RemovablePointWarning, stacklevel=3)
    return lam


def _warn_truncation(rel, cfg):
    worst = float(np.max(rel, initial=0.0))
    if worst > cfg.rel_tol:
        warnings.warn(
            f"aliasing sum truncated at k_max={cfg.k_max} has estimated relative error "
            f"{worst:.3g} > rel_tol={cfg.rel_tol:.3g}", TruncationWarning, stacklevel=3)


def f_bm(lam, alpha: float, delta: float):
    """Spectral density of the OU component sampled at mesh ``delta``."""
    lam = np.asarray(lam, dtype=float)
    q = math.exp(-alpha * delta)
    num = -math.expm1(-2.0 * alpha * delta) / (2.0 * alpha)
    den = math.expm1(-alpha * delta) ** 2 + 4.0 * q * np.sin(0.5 * lam) ** 2
    return num / den


def _f_bm_dalpha(lam, alpha, delta):
    q = math.exp(-alpha * delta)
    em = math.expm1(-alpha * delta)
    num = -math.expm1(-2.0 * alpha * delta) / (2.0 * alpha)
    den = em ** 2 + 4.0 * q * np.sin(0.5 * lam) ** 2
    dnum = delta * q * q / alpha - num / alpha
    # q - cos(lambda), written without cancellation
    q_minus_cos = em + 2.0 * np.sin(0.5 * lam) ** 2
    dden = -2.0 * delta * q * q_minus_cos
    return dnum / den - num * dden / den ** 2


def f_frac(lam, params: ModelParams, delta: float, cfg: FractionalSumConfig = DEFAULT_SUM):
    lam = _check_lambda(lam, params)
    s0, _, _, rel = aliasing_sums(lam, params.hurst, params.alpha * delta, cfg)
    _warn_truncation(rel, cfg)
    amp = params.sigma ** 2 * hurst_constant(params.hurst) * delta ** (2 * params.hurst)
    return amp * s0


def eval_symbol(lam, params: ModelParams, delta: float,
                cfg: FractionalSumConfig = DEFAULT_SUM) -> SymbolEval:
    lam = _check_lambda(lam, params)
    H, s, a = params.hurst, params.sigma, params.alpha
    s0, s1, s2, rel = aliasing_sums(lam, H, a * delta, cfg)
    _warn_truncation(rel, cfg)
    base = hurst_constant(H) * delta ** (2 * H)
    frac = s * s * base * s0
    bm = f_bm(lam, a, delta)
    r = s * s * base * (hurst_log_derivative(H) * s0 + s1)
    return SymbolEval(
        f_total=frac + bm,
        f_frac=frac,
        f_bm=bm,
        d_sigma=2.0 * s * base * s0,
        d_hurst=2.0 * math.log(delta) * frac + r,
        d_alpha=s * s * base * delta * s2 + _f_bm_dalpha(lam, a, delta),
        r_remainder=r,
    )


def symbol_ratios(lam, params: ModelParams, delta: float, cfg: FractionalSumConfig = DEFAULT_SUM):
    """Return (g_sigma, g_H, g_alpha): d_sigma, r_remainder and d_alpha over f_total."""
    ev = eval_symbol(lam, params, delta, cfg)
    return ev.d_sigma / ev.f_total, ev.r_remainder / ev.f_total, ev.d_alpha / ev.f_total


@dataclass(frozen=True)
class LimitProfiles:
    """Low-frequency limits of the score symbols after the substitution lambda = delta * u."""

    rho: float
    amp_A: float
    alpha: float
    m: float

    def w(self, u):
        return 1.0 / (1.0 + np.abs(u) ** self.rho / self.amp_A)

    def q_alpha(self, u):
        u = np.asarray(u, dtype=float)
        return -2.0 * self.alpha / (self.alpha ** 2 + u * u)

    def centered_log(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return -2.0 * self.w(u) * (np.log(np.abs(u)) - self.m)


def amplitude(params: ModelParams) -> float:
    """A = sigma^2 Gamma(2H+1) sin(pi H)."""
    return params.sigma ** 2 * hurst_constant(params.hurst)


def limit_profiles(params: ModelParams, m_const: float) -> LimitProfiles:
    if classify_regime(params) is not HurstRegime.SUPERCRITICAL:
        raise RegimeError("limit profiles are defined for H > 3/4")
    return LimitProfiles(params.rho, amplitude(params), params.alpha, float(m_const))
