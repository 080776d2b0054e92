"""Symmetric interior penalty DG assembly on uniform tensor meshes.

Element and face matrices are computed by Gauss quadrature of the bilinear
form on the reference element.  On a uniform mesh every element shares the
same volume matrix and every face the same trace matrices, so the global
matrix is built by scattering a handful of local blocks; the entries are still
the quadrature values, nothing is taken from closed forms.

The closed-form stencil entries (:func:`stencil_oracle_entry`) live here too
but are used only as an independent check of the quadrature path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import linalg
from .dg_space import DgSpace
from .legendre import gauss_rule, legendre_table
from .linalg import CsrMatrix

DEFAULT_ALPHA0 = 10.0


@dataclass(frozen=True)
class PenaltyConfig:
    alpha0: float = DEFAULT_ALPHA0

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")

    def alpha(self, k: int, h: float) -> float:
        return self.alpha0 * k**2 / h


@dataclass(frozen=True, eq=False)
class AssembledLevel:
    A: CsrMatrix
    M_diag: np.ndarray
    D_diag: np.ndarray
    k: int
    space: DgSpace


def tensor_rule(q: int, d: int):
    """Tensor Gauss rule on [-1, 1]^d; points (q^d, d) with the first axis fastest."""
    rule = gauss_rule(q)
    if d == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*([rule.nodes] * d), indexing="ij")
    wgrids = np.meshgrid(*([rule.weights] * d), indexing="ij")
    # reverse so axis 0 varies fastest
    pts = np.stack([g.ravel(order="F") for g in grids], axis=1)
    wts = np.prod(np.stack([w.ravel(order="F") for w in wgrids], axis=1), axis=1)
    return pts, wts


def face_rule(q: int, d: int, axis: int, side: int):
    pts, wts = tensor_rule(q, d - 1)
    pts = np.insert(pts, axis, float(side), axis=1)
    return pts, wts


def basis_and_gradients(space: DgSpace, xi: np.ndarray):
    """Values (N_k, n) and physical gradients (d, N_k, n) at reference points."""
    d, h = space.dim, space.mesh.h
    vals, ders = legendre_table(space.k, xi.T)
    sig = space.multi_indices
    phi = np.ones((sig.shape[0], xi.shape[0]))
    for i in range(d):
        phi *= vals[sig[:, i], i, :]
    grad = np.empty((d,) + phi.shape)
    for i in range(d):
        g = np.ones_like(phi)
        for j in range(d):
            g *= (ders if j == i else vals)[sig[:, j], j, :]
        grad[i] = g * (2.0 / h)
    return phi, grad


def local_blocks(space: DgSpace, alpha: float, q: int | None = None) -> dict:
    """Reference volume block and per-axis face blocks for one level.

    Keys: ``"vol"``; ``("int", axis)`` -> (B11, B12, B21, B22) for the lower
    element 1 and upper element 2 of an interior face; ``("bnd", axis, side)``
    for a boundary face on the lower (-1) or upper (+1) wall.  Row index is
    the test function, column the trial function.
    """
    d, h, k = space.dim, space.mesh.h, space.k
    q = k + 2 if q is None else q
    pts, wts = tensor_rule(q, d)
    _, grad = basis_and_gradients(space, pts)
    w = wts * (0.5 * h) ** d
    blocks = {"vol": sum(grad[i] @ (w[:, None] * grad[i].T) for i in range(d))}
    for axis in range(d):
        trace, dtrace = {}, {}
        for side in (-1, 1):
            fp, fw = face_rule(q, d, axis, side)
            phi, g = basis_and_gradients(space, fp)
            trace[side], dtrace[side] = phi, g[axis]
        wf = fw * (0.5 * h) ** (d - 1)

        def form(j_r, g_r, j_c, g_c):
            return (
                -(j_r * wf) @ g_c.T
                - (g_r * wf) @ j_c.T
                + alpha * (j_r * wf) @ j_c.T
            )

        # element 1 meets the face at xi_axis=+1, element 2 at xi_axis=-1
        jump = {1: trace[1], 2: -trace[-1]}
        avg = {1: 0.5 * dtrace[1], 2: 0.5 * dtrace[-1]}
        blocks[("int", axis)] = tuple(
            form(jump[r], avg[r], jump[c], avg[c]) for r, c in ((1, 1), (1, 2), (2, 1), (2, 2))
        )
        for side in (-1, 1):
            j, g = trace[side], side * dtrace[side]
            blocks[("bnd", axis, side)] = form(j, g, j, g)
    return blocks


def _scatter(block, rows_e, cols_e, n_local, tol):
    a, b = np.nonzero(np.abs(block) > tol)
    v = block[a, b]
    rows = (rows_e[:, None] * n_local + a[None, :]).ravel()
    cols = (cols_e[:, None] * n_local + b[None, :]).ravel()
    return rows, cols, np.broadcast_to(v, (rows_e.size, v.size)).ravel()


def assemble_stiffness(
    space: DgSpace,
    penalty: PenaltyConfig = PenaltyConfig(),
    penalty_degree: int | None = None,
    drop_tol: float | None = linalg.DROP_TOL,
) -> CsrMatrix:
    """Stiffness matrix of the SIPDG form with penalty ``alpha0 * k^2 / h``.

    ``penalty_degree`` overrides the ``k`` in the penalty (defaults to the
    space degree).
    """
    mesh, n_loc = space.mesh, space.n_local
    kp = space.k if penalty_degree is None else penalty_degree
    blocks = local_blocks(space, penalty.alpha(kp, mesh.h))

    # self blocks depend only on which walls an element touches
    c = mesh.grid_coords
    type_code = np.zeros(mesh.n_elements, dtype=np.int64)
    for axis in range(mesh.dim):
        lo = (c[:, axis] == 0).astype(np.int64)
        hi = (c[:, axis] == mesh.n - 1).astype(np.int64)
        type_code = type_code * 4 + lo * 2 + hi
    self_blocks = {}
    for code in np.unique(type_code):
        blk = blocks["vol"].copy()
        rem = int(code)
        for axis in reversed(range(mesh.dim)):
            lo, hi = (rem >> 1) & 1, rem & 1
            rem >>= 2
            b11, _, _, b22 = blocks[("int", axis)]
            blk += blocks[("bnd", axis, -1)] if lo else b22
            blk += blocks[("bnd", axis, 1)] if hi else b11
        self_blocks[int(code)] = blk

    scale = max(np.abs(b).max() for b in self_blocks.values())
    for axis in range(mesh.dim):
        if mesh.interior_pairs[axis].size:
            scale = max(scale, np.abs(blocks[("int", axis)][1]).max())
    tol = 0.0 if drop_tol is None else drop_tol * scale

    parts = []
    for code, blk in self_blocks.items():
        elems = np.nonzero(type_code == code)[0]
        parts.append(_scatter(blk, elems, elems, n_loc, tol))
    for axis in range(mesh.dim):
        pairs = mesh.interior_pairs[axis]
        if not pairs.size:
            continue
        _, b12, b21, _ = blocks[("int", axis)]
        parts.append(_scatter(b12, pairs[:, 0], pairs[:, 1], n_loc, tol))
        parts.append(_scatter(b21, pairs[:, 1], pairs[:, 0], n_loc, tol))
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    return linalg.from_coo(rows, cols, vals, (space.n_dofs, space.n_dofs), drop_tol=drop_tol)


def assemble_mass_diag(space: DgSpace) -> np.ndarray:
    h = space.mesh.h
    local = np.prod(h / (2.0 * space.multi_indices + 1.0), axis=1)
    return np.tile(local, space.mesh.n_elements)


def element_points(space: DgSpace, q: int):
    """Physical quadrature points (N_h, Q, d), weights (Q,) and reference points."""
    pts, wts = tensor_rule(q, space.dim)
    h = space.mesh.h
    x = space.mesh.lower_corners[:, None, :] + 0.5 * h * (pts[None, :, :] + 1.0)
    return x, wts * (0.5 * h) ** space.dim, pts


def assemble_load(space: DgSpace, f: Callable[[np.ndarray], np.ndarray], q: int | None = None) -> np.ndarray:
    """Load vector ``(f, Psi)`` with ``f`` mapping an (n, d) point array to (n,)."""
    q = space.k + 2 if q is None else q
    x, w, pts = element_points(space, q)
    fx = np.asarray(f(x.reshape(-1, space.dim)), dtype=np.float64).reshape(x.shape[:2])
    phi = space.local_values(pts)
    return ((fx * w) @ phi.T).ravel()


def assemble_level(space: DgSpace, penalty: PenaltyConfig = PenaltyConfig()) -> AssembledLevel:
    A = assemble_stiffness(space, penalty)
    D = A.diagonal()
    if np.any(D <= 0):
        raise linalg.NotSPDError("nonpositive stiffness diagonal")
    return AssembledLevel(A, assemble_mass_diag(space), D, space.k, space)


def stencil_oracle_entry(T, sigma, T_p, sigma_p, k, penalty, mesh) -> float:
    """Closed-form interior stiffness entry ``A(Psi_T^sigma, Psi_T'^sigma')``."""
    alpha0 = penalty.alpha0 if isinstance(penalty, PenaltyConfig) else float(penalty)
    interior = mesh.is_interior_element
    if not (interior[T] and interior[T_p]):
        raise ValueError("closed-form stencil only covers elements without boundary faces")
    d, h = mesh.dim, mesh.h
    s = np.atleast_1d(sigma).astype(int)
    t = np.atleast_1d(sigma_p).astype(int)
    a2 = 2.0 * alpha0 * k**2
    if T == T_p:
        total = 0.0
        for i in range(d):
            if (s[i] - t[i]) % 2:
                continue
            lo, hi = min(s[i], t[i]), max(s[i], t[i])
            factor = 1.0
            for j in range(d):
                if j != i:
                    factor *= (s[j] == t[j]) / (2.0 * s[j] + 1.0)
            total += (a2 + lo * (lo + 1) - hi * (hi + 1)) * factor
        return h ** (d - 2) * total
    for nb, axis, side in mesh.neighbors(T):
        if nb == T_p:
            break
    else:
        return 0.0
    factor = 1.0
    for j in range(d):
        if j != axis:
            factor *= (s[j] == t[j]) * h / (2.0 * s[j] + 1.0)
    upper_sigma = t[axis] if side > 0 else s[axis]
    sign = (-1.0) ** (upper_sigma + 1)
    return sign * (a2 - s[axis] * (s[axis] + 1) - t[axis] * (t[axis] + 1)) / (2.0 * h) * factor


def manufactured_solution(mesh):
    """``u = prod sin(pi (x_i - a_i) / L)``, its gradient and ``f = -lap u``."""
    a = np.asarray(mesh.lower)
    L = np.asarray(mesh.upper) - a
    c = np.pi / L

    def u(x):
        x = np.atleast_2d(x)
        return np.prod(np.sin(c * (x - a)), axis=1)

    def grad_u(x):
        x = np.atleast_2d(x)
        s = np.sin(c * (x - a))
        out = np.empty_like(x)
        for i in range(x.shape[1]):
            others = np.prod(np.delete(s, i, axis=1), axis=1) if x.shape[1] > 1 else 1.0
            out[:, i] = c[i] * np.cos(c[i] * (x[:, i] - a[i])) * others
        return out

    def f(x):
        return np.sum(c**2) * u(x)

    return u, grad_u, f


def dg_error_norms(space: DgSpace, u_h, u_exact, grad_u_exact, q: int | None = None):
    """Energy-type error ``||u - u_h||_{1,k,h}`` and the L2 error."""
    mesh, d, h, k = space.mesh, space.dim, space.mesh.h, space.k
    q = k + 3 if q is None else q
    coeff = np.asarray(u_h, dtype=np.float64).reshape(mesh.n_elements, space.n_local)

    x, w, pts = element_points(space, q)
    phi, grad = basis_and_gradients(space, pts)
    flat = x.reshape(-1, d)
    err = np.asarray(u_exact(flat)).reshape(x.shape[:2]) - coeff @ phi
    l2_sq = float(np.sum(err**2 * w))
    gex = np.asarray(grad_u_exact(flat)).reshape(x.shape)
    h1_sq = 0.0
    for i in range(d):
        gi = gex[:, :, i] - coeff @ grad[i]
        h1_sq += float(np.sum(gi**2 * w))

    jump_sq = 0.0
    for axis in range(d):
        fp_hi, fw = face_rule(q, d, axis, +1)
        fp_lo, _ = face_rule(q, d, axis, -1)
        wf = fw * (0.5 * h) ** (d - 1)
        tr_hi = space.local_values(fp_hi)
        tr_lo = space.local_values(fp_lo)
        pairs = mesh.interior_pairs[axis]
        if pairs.size:
            jmp = coeff[pairs[:, 0]] @ tr_hi - coeff[pairs[:, 1]] @ tr_lo
            jump_sq += float(np.sum(jmp**2 * wf))
        low, high = mesh.boundary_elements[axis]
        for elems, fp, tr in ((low, fp_lo, tr_lo), (high, fp_hi, tr_hi)):
            xf = mesh.lower_corners[elems][:, None, :] + 0.5 * h * (fp[None, :, :] + 1.0)
            ue = np.asarray(u_exact(xf.reshape(-1, d))).reshape(xf.shape[:2])
            jump_sq += float(np.sum((ue - coeff[elems] @ tr) ** 2 * wf))
    energy = np.sqrt(h1_sq + k**2 / h * jump_sq)
    return float(energy), float(np.sqrt(l2_sq))


def dump_level(level: AssembledLevel, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    linalg.write_matrix_market(level.A, directory / f"A_k{level.k}.mtx")
    linalg.write_matrix_market(linalg.diags(level.M_diag), directory / f"M_k{level.k}.mtx")
