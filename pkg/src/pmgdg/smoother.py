"""Damped Jacobi and fourth-kind Chebyshev smoothers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .linalg import CsrMatrix

OMEGA_SAFETY = 1.05


@dataclass(frozen=True)
class SmootherConfig:
    kind: str = "chebyshev4"
    steps: int = 1
    omega: float | str = "auto"
    safety: float = OMEGA_SAFETY
    method: str = "power"

    def __post_init__(self):
        if self.method not in OMEGA_METHODS:
            raise ValueError(f"unknown omega method {self.method!r}")
        if self.kind not in ("jacobi", "chebyshev4"):
            raise ValueError(f"unknown smoother {self.kind!r}")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")


def jacobi_sweep(A: CsrMatrix, D_diag, omega: float, f, z0, m: int) -> np.ndarray:
    z = np.array(z0, dtype=np.float64)
    scaled = omega / np.asarray(D_diag)
    for _ in range(m):
        z += scaled * (f - linalg.spmv(A, z))
    return z


def chebyshev4_sweep(A: CsrMatrix, D_diag, omega: float, f, z0, m: int) -> np.ndarray:
    """``m`` steps of the fourth-kind Chebyshev iteration.

    The error after the sweep is ``P_m(omega D^-1 A)`` applied to the initial
    error, see :func:`poly_pm_eval`.
    """
    z = np.array(z0, dtype=np.float64)
    w = np.zeros_like(z)
    scaled = omega / np.asarray(D_diag)
    for i in range(1, m + 1):
        r = f - linalg.spmv(A, z)
        w = ((2 * i - 3) / (2 * i + 1)) * w + ((8 * i - 4) / (2 * i + 1)) * scaled * r
        z += w
    return z


def poly_pm_eval(m: int, x):
    """Error polynomial ``P_m`` of the fourth-kind Chebyshev smoother."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    p_prev, p = np.ones_like(x), 1.0 - 4.0 * x / 3.0
    if m == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for i in range(2, m + 1):
        p_prev, p = p, ((4 * i - 2) / (2 * i + 1)) * (1.0 - 2.0 * x) * p - ((2 * i - 3) / (2 * i + 1)) * p_prev
    return p if np.ndim(p) else float(p)


def apply_pm(A: CsrMatrix, D_diag, omega: float, m: int, e) -> np.ndarray:
    """``P_m(omega D^-1 A) e`` by the three-term recursion on vectors."""
    e = np.asarray(e, dtype=np.float64)
    scaled = omega / np.asarray(D_diag)
    if m == 0:
        return e.copy()

    def B(v):
        return scaled * linalg.spmv(A, v)

    prev, cur = e, e - (4.0 / 3.0) * B(e)
    for i in range(2, m + 1):
        nxt = ((4 * i - 2) / (2 * i + 1)) * (cur - 2.0 * B(cur)) - ((2 * i - 3) / (2 * i + 1)) * prev
        prev, cur = cur, nxt
    return cur


def spectral_radius_jacobi(A: CsrMatrix, D_diag, seed: int = 0, tol: float = 1e-6,
                           max_iter: int = 5000) -> float:
    """Power-iteration estimate of ``rho(D^-1 A)`` via the symmetric ``D^-1/2 A D^-1/2``."""
    s = 1.0 / np.sqrt(np.asarray(D_diag))

    def apply(v):
        return s * linalg.spmv(A, s * v)

    return linalg.power_iteration_symmetric(apply, A.n_rows, tol=tol, max_iter=max_iter, seed=seed)


def gershgorin_bound(A: CsrMatrix, D_diag) -> float:
    """Row-sum upper bound on ``rho(D^-1 A)``."""
    row_abs = np.add.reduceat(np.abs(A.values), A.row_offsets[:-1]) if A.values.size else np.zeros(A.n_rows)
    row_abs[np.diff(A.row_offsets) == 0] = 0.0
    return float(np.max(row_abs / np.abs(np.asarray(D_diag))))


OMEGA_METHODS = ("power", "gershgorin")


def select_omega(A: CsrMatrix, D_diag, seed: int = 0, safety: float = OMEGA_SAFETY,
                 method: str = "power") -> float:
    """Damping factor ``1 / (safety * lambda)``.

    ``method="power"`` estimates ``lambda = rho(D^-1 A)`` by power iteration;
    ``"gershgorin"`` uses the row-sum bound, which already satisfies
    ``omega * rho <= 1`` so ``safety`` is ignored.
    """
    if method == "power":
        return 1.0 / (safety * spectral_radius_jacobi(A, D_diag, seed=seed))
    if method == "gershgorin":
        return 1.0 / gershgorin_bound(A, D_diag)
    raise ValueError(f"omega method must be one of {OMEGA_METHODS}")


def smoothing_ratio(level, omega: float, m: int, seed: int = 0) -> float:
    """Measured ``||M^-1/2 A P_m e|| / ||e||_A`` for a seeded random error ``e``."""
    rng = np.random.default_rng(seed)
    e = rng.uniform(-1.0, 1.0, level.A.n_rows)
    e /= np.linalg.norm(e)
    smoothed = apply_pm(level.A, level.D_diag, omega, m, e)
    num = linalg.a_norm(None, 0, linalg.spmv(level.A, smoothed) / np.sqrt(level.M_diag))
    return num / linalg.a_norm(level.A, 1, e)
