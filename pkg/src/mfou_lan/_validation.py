"""Input checks shared by the estimator and the command line."""

from __future__ import annotations

import math

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError


def check_paths(X, n_features=None) -> np.ndarray:
    """2-D float array of paths (one per row), finite, with at least two columns."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_features=2)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} observations per path, expected {n_features}")
    return X


def check_positive(name: str, value) -> float:
    v = float(value)
    if not math.isfinite(v) or v <= 0:
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return v


def check_mesh(n: int, kappa=None, delta=None):
    """Resolve (kappa, delta) for n observations; exactly one may be given."""
    if (kappa is None) == (delta is None):
        raise DomainError("give exactly one of kappa and delta")
    if kappa is not None:
        k = float(kappa)
        if not 0.0 < k < 1.0:
            raise DomainError(f"kappa must lie in (0, 1), got {kappa!r}")
        return k, None
    d = check_positive("delta", delta)
    if d >= 1.0:
        raise DomainError("delta must be below 1")
    return None, d
