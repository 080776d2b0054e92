"""Full GMRES with optional right preconditioning."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import linalg
from .linalg import CsrMatrix, ConvergenceError


@dataclass(frozen=True)
class GmresConfig:
    rel_tol: float = 1e-8
    max_iterations: int = 2000

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


class GmresResult(NamedTuple):
    u: np.ndarray
    iterations: int
    orthogonality: float  # max |V^T V - I| over the Krylov basis


class GmresError(ConvergenceError):
    def __init__(self, message, best, iterations):
        super().__init__(message, estimate=float("nan"), iterations=iterations)
        self.best = best


def _givens(a: float, b: float):
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def gmres_solve(A: CsrMatrix, f, preconditioner: Callable | None = None,
                config: GmresConfig = GmresConfig(), x0=None) -> GmresResult:
    """Solve ``A u = f`` by non-restarted GMRES with modified Gram-Schmidt.

    Each Arnoldi vector is orthogonalized twice.

    ``preconditioner(r)`` applies ``M^-1`` on the right, so the monitored
    residual is that of the original system. Convergence is confirmed on the
    true residual ``||f - A u|| / ||f||``.
    """
    f = np.asarray(f, dtype=np.float64)
    n = f.size
    if A.n_rows != n:
        raise linalg.DimensionError("right-hand side length mismatch")
    apply_m = preconditioner if preconditioner is not None else (lambda r: r)
    u0 = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    f_norm = np.linalg.norm(f)
    if f_norm == 0.0:
        return GmresResult(np.zeros(n), 0, 0.0)
    target = config.rel_tol * f_norm

    r0 = f - linalg.spmv(A, u0)
    beta = np.linalg.norm(r0)
    if beta <= target:
        return GmresResult(u0, 0, 0.0)

    max_it = min(config.max_iterations, n)
    V = np.zeros((max_it + 1, n))
    Z = np.zeros((max_it, n))
    H = np.zeros((max_it + 1, max_it))
    cs, sn = np.zeros(max_it), np.zeros(max_it)
    g = np.zeros(max_it + 1)
    g[0] = beta
    V[0] = r0 / beta

    def solution(j):
        y = np.linalg.solve(np.triu(H[:j, :j]), g[:j]) if j else np.zeros(0)
        return u0 + Z[:j].T @ y

    j = 0
    while j < max_it:
        Z[j] = apply_m(V[j])
        w = linalg.spmv(A, Z[j])
        w_norm = np.linalg.norm(w)
        # two MGS passes keep the basis orthogonal to working precision
        for _ in range(2):
            for i in range(j + 1):
                c = V[i] @ w
                H[i, j] += c
                w -= c * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        breakdown = H[j + 1, j] <= 1e-14 * w_norm
        if not breakdown:
            V[j + 1] = w / H[j + 1, j]
        for i in range(j):
            a, b = H[i, j], H[i + 1, j]
            H[i, j], H[i + 1, j] = cs[i] * a + sn[i] * b, -sn[i] * a + cs[i] * b
        cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
        H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        j += 1
        if abs(g[j]) <= target or breakdown:
            u = solution(j)
            if np.linalg.norm(f - linalg.spmv(A, u)) <= target:
                Vj = V[:j]
                ortho = float(np.max(np.abs(Vj @ Vj.T - np.eye(j))))
                return GmresResult(u, j, ortho)
            if breakdown:
                break
    u = solution(j)
    raise GmresError(
        f"GMRES did not reach {config.rel_tol:g} in {j} iterations "
        f"(true relative residual {np.linalg.norm(f - linalg.spmv(A, u)) / f_norm:.3e})",
        best=u, iterations=j,
    )
