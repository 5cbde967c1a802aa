"""Exact Gaussian sample paths from a stationary Toeplitz covariance.

Replication ``r`` under seed ``s`` always uses the generator keyed by
``SeedSequence(s, spawn_key=(r,))``, so any replication can be reproduced on
its own, in any order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DomainError
from .toeplitz import AutocovSequence, CholeskyFactor, ToeplitzMatrix, cholesky

_NEG_TOL = 1e-10
_MAX_FALLBACK_N = 4096
_AUTO_CHOLESKY_MAX_N = 1024


@dataclass(frozen=True)
class SimConfig:
    method: str = "auto"
    seed: int = 0
    embedding_pad: int = 2

    def __post_init__(self):
        if self.method not in ("auto", "cholesky", "circulant"):
            raise DomainError(f"unknown simulation method {self.method!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.embedding_pad < 2:
            raise DomainError("embedding_pad must be at least 2")


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(rep),)))


def standard_normals(seed: int, n: int, reps: int = 1, start: int = 0) -> np.ndarray:
    """Rows of independent N(0, 1) draws, one row per replication index."""
    return np.stack([replication_rng(seed, r).standard_normal(n) for r in range(start, start + reps)])


def sample_cholesky(chol: CholeskyFactor, seed: int = 0, *, reps: Optional[int] = None,
                    z: Optional[np.ndarray] = None) -> np.ndarray:
    """X = L Z. Returns one path, or ``reps`` paths as rows. ``z`` overrides the
    random draws (same shape as the output)."""
    n = chol.n
    if z is None:
        z = standard_normals(seed, n, 1 if reps is None else reps)
        if reps is None:
            z = z[0]
    z = np.asarray(z, dtype=float)
    return z @ chol.lower.T


def embedding_eigenvalues(gamma) -> np.ndarray:
    """Eigenvalues of the minimal circulant embedding of length 2 (len(gamma) - 1)."""
    g = np.asarray(gamma.gamma if isinstance(gamma, AutocovSequence) else gamma, dtype=float)
    row = np.concatenate([g, g[-2:0:-1]])
    return np.fft.rfft(row).real


def sample_circulant(gamma, n: int, cfg: SimConfig = SimConfig(), seed: Optional[int] = None, *,
                     reps: Optional[int] = None) -> np.ndarray:
    """Exact stationary Gaussian paths by spectral synthesis on a circulant
    embedding.

    ``gamma`` must hold at least ``n`` lags. When it holds more, the
    embedding uses all of them (length ``2 (len(gamma) - 1)``). Eigenvalues
    above ``-1e-10 * max`` are clipped to zero. Anything more negative falls
    back to Cholesky for ``n <= 4096`` and raises otherwise.
    """
    seed = cfg.seed if seed is None else seed
    g = np.asarray(gamma.gamma if isinstance(gamma, AutocovSequence) else gamma, dtype=float)
    if g.size < n:
        raise DomainError(f"need at least n={n} lags, got {g.size}")
    count = 1 if reps is None else reps
    if n == 1:
        out = np.sqrt(g[0]) * standard_normals(seed, 1, count)
        return out[0] if reps is None else out
    eig = embedding_eigenvalues(g)
    top = eig.max()
    if eig.min() < -_NEG_TOL * top:
        if n > _MAX_FALLBACK_N:
            raise DomainError("circulant embedding is not nonnegative definite and n is too "
                              "large for the Cholesky fallback")
        chol = cholesky(ToeplitzMatrix(g[:n]))
        return sample_cholesky(chol, seed, reps=reps)
    eig = np.clip(eig, 0.0, None)
    m = 2 * (g.size - 1)
    # Real synthesis: X = irfft(sqrt(eig) * W) with Hermitian complex normals W
    # of the right variances, built from m independent N(0, 1) per replication.
    half = m // 2
    z = standard_normals(seed, m, count)
    w = np.empty((count, half + 1), dtype=complex)
    w[:, 0] = z[:, 0] * np.sqrt(m)
    w[:, half] = z[:, 1] * np.sqrt(m)
    w[:, 1:half] = (z[:, 2:half + 1] + 1j * z[:, half + 1:]) * np.sqrt(m / 2.0)
    x = np.fft.irfft(np.sqrt(eig)[None, :] * w, n=m, axis=1)[:, :n]
    return x[0] if reps is None else x


def sample_paths(n: int, reps: int, cfg: SimConfig, *, chol: Optional[CholeskyFactor] = None,
                 gamma=None) -> np.ndarray:
    """``reps`` paths of length n by the configured method (auto: Cholesky up to n = 1024)."""
    method = cfg.method
    if method == "auto":
        method = "cholesky" if n <= _AUTO_CHOLESKY_MAX_N else "circulant"
    if method == "cholesky":
        if chol is None:
            if gamma is None:
                raise DomainError("Cholesky sampling needs a factor or an autocovariance")
            g = np.asarray(gamma.gamma if isinstance(gamma, AutocovSequence) else gamma)
            chol = cholesky(ToeplitzMatrix(g[:n]))
        return sample_cholesky(chol, cfg.seed, reps=reps)
    if gamma is None:
        if chol is None:
            raise DomainError("circulant sampling needs an autocovariance")
        gamma = chol.lower[:, 0] * chol.lower[0, 0]
    return sample_circulant(gamma, n, cfg, reps=reps)


def write_path_csv(path, x) -> None:
    x = np.asarray(x, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_index", "x_value"])
        for i, v in enumerate(x):
            w.writerow([i, "%.17g" % v])


def read_path_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "x_value" not in reader.fieldnames:
            raise DomainError(f"{path}: expected columns t_index,x_value")
        rows = [(int(r["t_index"]), float(r["x_value"])) for r in reader]
    rows.sort()
    if [i for i, _ in rows] != list(range(len(rows))):
        raise DomainError(f"{path}: t_index must run 0..n-1")
    return np.array([v for _, v in rows])
