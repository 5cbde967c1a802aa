"""Asymptotic information constants.

For H > 3/4 everything reduces to the low-frequency weight
``w(u) = 1 / (1 + |u|**rho / A)`` and the integrals

    J_k = int_R (log|u|)**k w(u)**2 du,   k = 0, 1, 2,

which have closed forms through Gamma, digamma and trigamma (the change of
variable t = |u|**rho / A turns w**2 into a beta-prime density). The
alpha cross terms have no closed form and are integrated numerically.

For 1/2 < H < 3/4 and 0 < H < 1/2 the limit constants are defined through
rescaled symbol ratios; they are extracted by evaluating the ratios at a
shrinking mesh and extrapolating.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from ._quadrature import frequency_rule, lower_cutoff
from .exceptions import QuadratureError, RegimeError
from .model import HurstRegime, ModelParams, SamplingScheme, classify_regime
from .spectral import (DEFAULT_SUM, FractionalSumConfig, aliasing_sums, amplitude,
                       eval_symbol, f_bm, hurst_constant, hurst_log_derivative,
                       limit_profiles)
from .special import digamma, gamma, special_functions, trigamma  # noqa: F401


@dataclass(frozen=True)
class AsymptoticConstants:
    rho: float
    amp_A: float
    J0: float
    J1: float
    J2: float
    b: float
    m: float
    I_ss: float
    I_HH_rem: float
    I_HH_perp: float
    I_aa: float
    I_as: float
    I_aH_perp: float
    I_aa_perp: float

    def to_dict(self) -> dict:
        return asdict(self)

    def diagonal(self) -> np.ndarray:
        return np.diag([self.I_ss, self.I_HH_perp, self.I_aa_perp])


def _require(params: ModelParams, regime: HurstRegime, what: str):
    got = classify_regime(params)
    if got is not regime:
        raise RegimeError(f"{what} requires the {regime.value} regime, got {got.value} "
                          f"(H={params.hurst})")


def j_integrals(params: ModelParams):
    """Closed forms ``(J0, J1, J2, m)``."""
    _require(params, HurstRegime.SUPERCRITICAL, "the J-integrals")
    rho = params.rho
    A = amplitude(params)
    s = 1.0 / rho
    J0 = (2.0 / rho) * A ** s * gamma(s) * gamma(2.0 - s)
    m = (math.log(A) + digamma(s) - digamma(2.0 - s)) / rho
    J1 = m * J0
    J2 = J1 * J1 / J0 + J0 / rho ** 2 * (trigamma(s) + trigamma(2.0 - s))
    return J0, J1, J2, m


def _power_log_tail(U, s, k):
    """int_U^inf u**(-s) (log u)**k du for s > 1 and k in {0, 1, 2}."""
    t = s - 1.0
    L = math.log(U)
    if k == 0:
        poly = 1.0 / t
    elif k == 1:
        poly = L / t + 1.0 / t ** 2
    else:
        poly = L * L / t + 2.0 * L / t ** 2 + 2.0 / t ** 3
    return U ** (-t) * poly


def j_integrals_quadrature(params: ModelParams, upper: float = 1e6):
    """Independent evaluation of ``(J0, J1, J2)``: adaptive quadrature on
    [0, upper] plus the tail beyond ``upper`` summed from the power series of
    w(u)**2 in (A / u**rho)."""
    _require(params, HurstRegime.SUPERCRITICAL, "the J-integrals")
    rho = params.rho
    A = amplitude(params)
    edges = [0.0, 1.0] + [10.0 ** e for e in range(1, int(round(math.log10(upper))) + 1)]
    out = []
    for k in range(3):
        def f(u, k=k):
            return (math.log(u) ** k if k else 1.0) / (1.0 + u ** rho / A) ** 2
        body = sum(integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)[0]
                   for lo, hi in zip(edges[:-1], edges[1:]))
        tail, j = 0.0, 0
        while True:
            term = (-1) ** j * (j + 1) * A ** (j + 2) * _power_log_tail(upper, (j + 2) * rho, k)
            tail += term
            j += 1
            if abs(term) < 1e-18 * abs(body + tail) or j > 200:
                break
        out.append(2.0 * (body + tail))
    return tuple(out)


def _profile_integral(fn: Callable) -> float:
    """int_R fn(u) du for an even integrand decaying faster than 1/u."""
    pieces = [(0.0, 1.0), (1.0, 100.0), (100.0, math.inf)]
    total = 0.0
    with warnings.catch_warnings():
        # QUADPACK flags roundoff near the log singularity at 0 while still
        # delivering full double accuracy there
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in pieces:
            total += integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    return 2.0 * total


def constants_supercritical(params: ModelParams) -> AsymptoticConstants:
    _require(params, HurstRegime.SUPERCRITICAL, "supercritical constants")
    sigma, alpha, rho = params.sigma, params.alpha, params.rho
    A = amplitude(params)
    J0, J1, J2, m = j_integrals(params)
    s = 1.0 / rho
    I_ss = 2.0 / (math.pi * sigma ** 2 * rho) * A ** s * gamma(s) * gamma(2.0 - s)
    I_HH_rem = J0 / math.pi
    I_HH_perp = (J2 - J1 * J1 / J0) / math.pi
    I_aa = 1.0 / (2.0 * alpha)

    prof = limit_profiles(params, m)
    I_as = _profile_integral(
        lambda u: float(prof.q_alpha(u) * (2.0 / sigma) * prof.w(u))) / (4.0 * math.pi)
    I_aH = _profile_integral(
        lambda u: float(prof.q_alpha(u) * prof.centered_log(u)) if u > 0 else 0.0) / (4.0 * math.pi)
    I_aa_perp = I_aa - I_as ** 2 / I_ss - I_aH ** 2 / I_HH_perp
    return AsymptoticConstants(rho, A, J0, J1, J2, hurst_log_derivative(params.hurst), m,
                               I_ss, I_HH_rem, I_HH_perp, I_aa, I_as, I_aH, I_aa_perp)


def i_hh_perp_closed(params: ModelParams) -> float:
    """Trigamma form of the projected H-information."""
    _require(params, HurstRegime.SUPERCRITICAL, "the projected H-information")
    rho = params.rho
    s = 1.0 / rho
    A = amplitude(params)
    J0 = (2.0 / rho) * A ** s * gamma(s) * gamma(2.0 - s)
    return J0 / (math.pi * rho ** 2) * (trigamma(s) + trigamma(2.0 - s))


def a_n_asymptotic(params: ModelParams, scheme: SamplingScheme) -> float:
    """Leading behaviour sigma (L_n + b/2 - m) of the first projection coefficient."""
    _require(params, HurstRegime.SUPERCRITICAL, "the a_n expansion")
    _, _, _, m = j_integrals(params)
    b = hurst_log_derivative(params.hurst)
    return params.sigma * (scheme.log_inv_delta + 0.5 * b - m)


# ---------------------------------------------------------------------------
# Limit extraction for the other two regimes

@dataclass(frozen=True)
class LimitQuadConfig:
    """Settings for extracting mesh-free limits by refinement.

    The mesh starts at ``delta0`` and shrinks by ``shrink`` per step. Each
    step is Richardson-extrapolated with the leading error exponent, and
    the loop stops once three consecutive extrapolated values agree to
    ``tol`` relative.
    """

    tol: float = 1e-6
    delta0: float = 1e-3
    shrink: float = 8.0
    max_steps: int = 40
    order: int = 20
    sum_cfg: FractionalSumConfig = DEFAULT_SUM


DEFAULT_LIMIT = LimitQuadConfig()


@dataclass(frozen=True)
class SubcriticalConstants:
    p: float
    K_ss: float
    K_sH: float
    K_HH: float
    block_det: float
    delta_final: float = float("nan")
    raw_final: tuple = field(default=(), repr=False)

    def block(self) -> np.ndarray:
        """Limit covariance 0.5 K of the normalized (S_sigma, R_H) pair."""
        return 0.5 * np.array([[self.K_ss, self.K_sH], [self.K_sH, self.K_HH]])


@dataclass(frozen=True)
class ShortMemoryConstants:
    Ktil_ss: float
    Ktil_sH: float
    Ktil_HH: float
    block: np.ndarray
    c_sup: float = float("nan")
    delta_final: float = float("nan")
    raw_final: tuple = field(default=(), repr=False)


def _frequency_integrals(fn, hurst, delta, order):
    """(1/pi) int_0^pi of the rows of fn(lambda), i.e. (1/2pi) over [-pi, pi]."""
    lam, w, _ = frequency_rule(16, lower_cutoff(hurst, delta), 0, order)
    vals = np.atleast_2d(fn(lam))
    return (vals * w[None, :]).sum(axis=1) / math.pi, vals


def _extract_limit(values_at: Callable, exponent: float, cfg: LimitQuadConfig):
    """Run the mesh refinement; returns (limit, raw_last, delta_last)."""
    r = cfg.shrink ** exponent
    delta = cfg.delta0
    raw_prev = None
    ext = []
    for _ in range(cfg.max_steps):
        raw = np.asarray(values_at(delta), dtype=float)
        if raw_prev is not None:
            ext.append(raw + (raw - raw_prev) / (r - 1.0))
            if len(ext) >= 3:
                last = np.array(ext[-3:])
                scale = np.max(np.abs(last[-1]))
                if np.max(np.ptp(last, axis=0)) <= cfg.tol * scale:
                    return last[-1], raw, delta
        raw_prev = raw
        delta /= cfg.shrink
    raise QuadratureError("limit extraction did not stabilise within the step budget")


def _subcritical_values(params, delta, cfg):
    p = params.rho
    scale = delta ** (-p)

    def fn(lam):
        ev = eval_symbol(lam, params, delta, cfg.sum_cfg)
        g = scale * ev.d_sigma / ev.f_total
        h = scale * ev.r_remainder / ev.f_total
        return np.stack([g * g, g * h, h * h])

    vals, _ = _frequency_integrals(fn, params.hurst, delta, cfg.order)
    return vals


def constants_subcritical(params: ModelParams,
                          quad_cfg: LimitQuadConfig = DEFAULT_LIMIT) -> SubcriticalConstants:
    """K constants of the (sigma, H) block for 1/2 < H < 3/4.

    K_ij = (1/2pi) int of products of delta**-p g_sigma and delta**-p g_H,
    taken in the limit delta -> 0.
    """
    _require(params, HurstRegime.SUBCRITICAL_LONG_MEMORY, "subcritical constants")
    p = params.rho
    lim, raw, d = _extract_limit(lambda dl: _subcritical_values(params, dl, quad_cfg), p, quad_cfg)
    kss, ksh, khh = (float(v) for v in lim)
    return SubcriticalConstants(p, kss, ksh, khh, kss * khh - ksh ** 2, d, tuple(raw))


def short_memory_ratios(lam, params: ModelParams, delta: float,
                        sum_cfg: FractionalSumConfig = DEFAULT_SUM):
    """Rescaled ratios (c~, d~) for 0 < H < 1/2 at mesh ``delta``."""
    H, s = params.hurst, params.sigma
    s0, s1, _, _ = aliasing_sums(lam, H, params.alpha * delta, sum_cfg)
    ft_h = hurst_constant(H) * s0
    ft_w = f_bm(lam, params.alpha, delta) / delta
    eps = delta ** (1.0 - 2.0 * H)
    c = ft_h / (s * s * ft_h + eps * ft_w)
    d = c * (hurst_log_derivative(H) + s1 / s0)
    return c, d


def constants_short_memory(params: ModelParams,
                           quad_cfg: LimitQuadConfig = DEFAULT_LIMIT) -> ShortMemoryConstants:
    """K~ constants (full-circle integrals of c~^2, c~ d~, d~^2) and the 2x2
    limit covariance of (S_sigma, R_H) / sqrt(n)."""
    _require(params, HurstRegime.SHORT_MEMORY, "short-memory constants")
    s = params.sigma

    def values(delta):
        def fn(lam):
            c, d = short_memory_ratios(lam, params, delta, quad_cfg.sum_cfg)
            return np.stack([c * c, c * d, d * d])
        v, _ = _frequency_integrals(fn, params.hurst, delta, quad_cfg.order)
        return 2.0 * math.pi * v

    lim, raw, d = _extract_limit(values, 1.0 - 2.0 * params.hurst, quad_cfg)
    kss, ksh, khh = (float(v) for v in lim)
    lam, _, _ = frequency_rule(16, lower_cutoff(params.hurst, d), 0, quad_cfg.order)
    c_sup = float(np.max(short_memory_ratios(lam, params, d, quad_cfg.sum_cfg)[0]))
    block = np.array([[s ** 2 / math.pi * kss, s ** 3 / (2 * math.pi) * ksh],
                      [s ** 3 / (2 * math.pi) * ksh, s ** 4 / (4 * math.pi) * khh]])
    return ShortMemoryConstants(kss, ksh, khh, block, c_sup, d, tuple(raw))
