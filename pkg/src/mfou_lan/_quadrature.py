"""Composite Gauss-Legendre rules on (0, pi] graded geometrically toward 0."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=16)
def gauss_legendre01(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def lower_cutoff(hurst: float, scale: float) -> float:
    """Smallest frequency resolved explicitly.

    Near 0 the integrands behave like lambda**(1 - 2H) (times logs); the
    cutoff is chosen so that the neglected mass is around 1e-20 relative,
    and it always sits well below ``scale``.
    """
    expo = 20.0 / max(2.0 - 2.0 * hurst, 1e-3)
    cut = 10.0 ** (-min(expo, 280.0))
    return min(cut, 1e-10 * scale)


def _panels_to_rule(edges, order):
    t, w = gauss_legendre01(order)
    lo, hi = edges[:-1], edges[1:]
    width = hi - lo
    nodes = (lo[:, None] + width[:, None] * t[None, :]).ravel()
    weights = (width[:, None] * w[None, :]).ravel()
    return nodes, weights


def frequency_rule(n_uniform: int, lam_min: float, level: int = 0, order: int = 20):
    """Nodes and weights for integrals over (lam_min, pi].

    ``n_uniform * 2**level`` equal panels cover [w_u, pi] (w_u = pi / that
    count), and geometric panels with ratio ``2**(1/2**level)`` cover
    [lam_min, w_u]. Returns ``(nodes, weights, geo_edges)``; the first two
    geometric panels are reported so callers can extrapolate the mass below
    ``lam_min``.
    """
    p = max(int(n_uniform), 1) * 2 ** level
    w_u = math.pi / p
    uni_edges = np.linspace(w_u, math.pi, p)
    ratio = 2.0 ** (1.0 / 2 ** level)
    k = max(int(math.ceil(math.log(w_u / lam_min) / math.log(ratio))), 1)
    geo_edges = w_u * ratio ** (-np.arange(k, -1, -1, dtype=float))
    geo_edges[-1] = w_u
    gn, gw = _panels_to_rule(geo_edges, order)
    un, uw = _panels_to_rule(uni_edges, order) if p > 1 else (np.empty(0), np.empty(0))
    return np.concatenate([gn, un]), np.concatenate([gw, uw]), geo_edges


def geometric_tail(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Extrapolate the mass below the first panel from the first two panel
    integrals, assuming they continue as a geometric series."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(second != 0, first / second, 0.0)
    r = np.where((r > 0) & (r < 1), r, 0.0)
    return first * r / (1.0 - r)
