"""Legendre polynomials on the reference interval [-1, 1].

Normalization is ``l_s(1) = 1``.  Everything here is vectorized over the
evaluation points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 64


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes.size


def _check_points(xi, strict=True):
    xi = np.asarray(xi, dtype=np.float64)
    if strict and np.any(np.abs(xi) > 1.0 + 1e-14):
        raise ValueError("evaluation point outside [-1, 1]")
    return xi


def legendre_table(max_degree: int, xi, strict: bool = True):
    """Values and first derivatives of ``l_0..l_max_degree`` at ``xi``.

    Returns two arrays of shape ``(max_degree + 1,) + xi.shape``.
    """
    if not 0 <= max_degree <= MAX_DEGREE:
        raise ValueError(f"degree must lie in [0, {MAX_DEGREE}]")
    xi = _check_points(xi, strict)
    vals = np.empty((max_degree + 1,) + xi.shape)
    ders = np.empty_like(vals)
    vals[0] = 1.0
    ders[0] = 0.0
    if max_degree >= 1:
        vals[1] = xi
        ders[1] = 1.0
    for n in range(1, max_degree):
        vals[n + 1] = ((2 * n + 1) * xi * vals[n] - n * vals[n - 1]) / (n + 1)
        # l'_{n+1} = l'_{n-1} + (2n+1) l_n
        ders[n + 1] = ders[n - 1] + (2 * n + 1) * vals[n]
    return vals, ders


def legendre_eval(sigma: int, xi):
    vals, _ = legendre_table(sigma, xi)
    out = vals[sigma]
    return float(out) if out.ndim == 0 else out


def legendre_deriv(sigma: int, xi):
    _, ders = legendre_table(max(sigma, 0), xi)
    out = ders[sigma]
    return float(out) if out.ndim == 0 else out


def christoffel_deriv(sigma: int, xi):
    """Derivative via the expansion into lower-degree Legendre polynomials.

    ``l'_s = (2s-1) l_{s-1} + (2s-5) l_{s-3} + ...``; used as an independent
    cross-check of :func:`legendre_deriv`.
    """
    vals, _ = legendre_table(max(sigma - 1, 0), xi)
    out = np.zeros_like(vals[0])
    for j in range(sigma - 1, -1, -2):
        out = out + (2 * j + 1) * vals[j]
    return float(out) if np.ndim(out) == 0 else out


def reference_mass_entry(sigma: int, sigma_p: int) -> float:
    return 2.0 / (2 * sigma + 1) if sigma == sigma_p else 0.0


def reference_stiff_entry(sigma: int, sigma_p: int) -> float:
    if (sigma - sigma_p) % 2:
        return 0.0
    s = min(sigma, sigma_p)
    return float(s * (s + 1))


@lru_cache(maxsize=None)
def _gauss(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(q: int) -> QuadratureRule:
    """``q``-point Gauss-Legendre rule on [-1, 1], exact to degree ``2q - 1``."""
    if not 1 <= q <= MAX_DEGREE:
        raise ValueError(f"number of points must lie in [1, {MAX_DEGREE}]")
    return QuadratureRule(*_gauss(q))
