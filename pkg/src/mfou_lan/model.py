"""Parameter and sampling-scheme value types, regime classification and
local alternatives.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import BoundaryHurstError, DomainError


class HurstRegime(enum.Enum):
    SUPERCRITICAL = "Supercritical"
    SUBCRITICAL_LONG_MEMORY = "SubcriticalLongMemory"
    SHORT_MEMORY = "ShortMemory"


@dataclass(frozen=True)
class ModelParams:
    """Parameter point theta = (sigma, H, alpha).

    ``sigma`` scales the fractional noise, ``hurst`` is its Hurst index and
    ``alpha`` the mean-reversion rate. Hurst values 1/2 and 3/4 are rejected
    by :func:`classify_regime`, and 1/2 already here because the fractional
    derivative terms degenerate there.
    """

    sigma: float
    hurst: float
    alpha: float
    _allow_zero_sigma: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("sigma", "hurst", "alpha"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise DomainError(f"{name} must be a finite real, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.sigma < 0 or (self.sigma == 0 and not self._allow_zero_sigma):
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.alpha <= 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.hurst < 1.0:
            raise DomainError(f"hurst must lie in (0, 1), got {self.hurst}")
        if self.hurst == 0.5:
            raise BoundaryHurstError("hurst = 1/2 is excluded")

    @classmethod
    def brownian_only(cls, hurst: float, alpha: float) -> "ModelParams":
        """Degenerate point with sigma = 0, used to isolate the OU component."""
        return cls(0.0, hurst, alpha, _allow_zero_sigma=True)

    @property
    def rho(self) -> float:
        return 2.0 * self.hurst - 1.0

    @property
    def regime(self) -> HurstRegime:
        return classify_regime(self)

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma, self.hurst, self.alpha])

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "hurst": self.hurst, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(d["sigma"], d["hurst"], d["alpha"])


def classify_regime(params: ModelParams) -> HurstRegime:
    h = params.hurst
    if h == 0.5 or h == 0.75:
        raise BoundaryHurstError(f"hurst = {h} lies on a regime boundary")
    if h > 0.75:
        return HurstRegime.SUPERCRITICAL
    if h > 0.5:
        return HurstRegime.SUBCRITICAL_LONG_MEMORY
    return HurstRegime.SHORT_MEMORY


@dataclass(frozen=True)
class SamplingScheme:
    """Sample size ``n`` and mesh ``delta``; ``kappa`` is set when delta = n**-kappa."""

    n: int
    delta: float
    kappa: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise DomainError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "delta", float(self.delta))
        if self.kappa is not None:
            k = float(self.kappa)
            if not 0.0 < k < 1.0:
                raise DomainError(f"kappa must lie in (0, 1), got {k}")
            object.__setattr__(self, "kappa", k)
            if abs(self.delta - self.n ** (-k)) > 1e-12 * self.delta:
                raise DomainError("delta is inconsistent with n**(-kappa)")

    @property
    def t_horizon(self) -> float:
        return self.n * self.delta

    @property
    def log_inv_delta(self) -> float:
        return -math.log(self.delta)

    def implied_kappa(self) -> float:
        """Exponent kappa with delta = n**(-kappa)."""
        if self.n < 2:
            raise DomainError("kappa is undefined for n < 2")
        return -math.log(self.delta) / math.log(self.n)

    def to_dict(self) -> dict:
        return {"n": self.n, "delta": self.delta, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingScheme":
        if d.get("kappa") is not None and d.get("delta") is None:
            return scheme_from_kappa(d["n"], d["kappa"])
        return cls(d["n"], d["delta"], d.get("kappa"))


def scheme_from_kappa(n: int, kappa: float) -> SamplingScheme:
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}")
    if not 0.0 < kappa < 1.0:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    return SamplingScheme(int(n), float(n) ** (-float(kappa)), float(kappa))


@dataclass(frozen=True)
class LocalAlternative:
    h: tuple

    def __post_init__(self):
        h = tuple(float(v) for v in self.h)
        if len(h) != 3 or not all(math.isfinite(v) for v in h):
            raise DomainError(f"h must be a finite 3-vector, got {self.h!r}")
        object.__setattr__(self, "h", h)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.h))

    def as_array(self) -> np.ndarray:
        return np.array(self.h)

    def __neg__(self) -> "LocalAlternative":
        return LocalAlternative(tuple(-v for v in self.h))

    @classmethod
    def parse(cls, text: str) -> "LocalAlternative":
        parts = [p for p in text.split(",") if p.strip()]
        try:
            return cls(tuple(float(p) for p in parts))
        except ValueError as exc:
            raise DomainError(f"cannot parse local alternative {text!r}") from exc


def local_shift(theta: ModelParams, h: LocalAlternative | Sequence[float],
                rate_inv: np.ndarray) -> ModelParams:
    """Return theta + rate_inv @ h, checking the result stays admissible."""
    if not isinstance(h, LocalAlternative):
        h = LocalAlternative(tuple(h))
    rate_inv = np.asarray(rate_inv, dtype=float)
    if rate_inv.shape != (3, 3):
        raise DomainError("rate_inv must be 3x3")
    if not any(h.h):
        return theta
    s, hh, a = theta.as_array() + rate_inv @ h.as_array()
    if not (s > 0 and a > 0 and 0 < hh < 1):
        raise DomainError(
            f"shifted parameter ({s:.6g}, {hh:.6g}, {a:.6g}) leaves the admissible region")
    return ModelParams(s, hh, a)
