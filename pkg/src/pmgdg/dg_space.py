"""Broken tensor-product Legendre spaces and their DOF numbering.

DOFs are numbered element-major: element ``e``'s local index ``a`` maps to
``e * N_k + a``.  The local basis is ordered by shells of ``max(sigma)`` so
that the level ``k-1`` basis is a prefix of the level ``k`` basis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .legendre import legendre_table
from .mesh import TensorMesh


@lru_cache(maxsize=None)
def local_basis_order(k: int, d: int) -> tuple:
    if k < 0:
        raise ValueError("degree must be nonnegative")
    out = []
    for shell in range(k + 1):
        block = [s for s in itertools.product(range(shell + 1), repeat=d) if max(s) == shell]
        out.extend(sorted(block))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class DgSpace:
    mesh: TensorMesh
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("degree must be nonnegative")

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @cached_property
    def basis(self) -> tuple:
        return local_basis_order(self.k, self.dim)

    @cached_property
    def multi_indices(self) -> np.ndarray:
        return np.array(self.basis, dtype=np.int64).reshape(-1, self.dim)

    @property
    def n_local(self) -> int:
        return (self.k + 1) ** self.dim

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_elements * self.n_local

    def dof(self, element: int, sigma) -> int:
        sigma = tuple(int(s) for s in np.atleast_1d(sigma))
        if max(sigma) > self.k:
            raise ValueError("multi-index exceeds space degree")
        return element * self.n_local + self.basis.index(sigma)

    def dof_map(self) -> np.ndarray:
        """(N_h, N_k) array of global DOF indices."""
        return np.arange(self.n_dofs).reshape(self.mesh.n_elements, self.n_local)

    def coarse_dofs(self, k_coarse: int) -> np.ndarray:
        """Global indices (in this space) of the nested level ``k_coarse`` DOFs."""
        if not 0 <= k_coarse <= self.k:
            raise ValueError("coarse level must not exceed this level")
        n_c = (k_coarse + 1) ** self.dim
        return (self.dof_map()[:, :n_c]).ravel()

    def local_values(self, xi) -> np.ndarray:
        """Basis values at reference points ``xi`` of shape (npts, d) -> (N_k, npts)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        vals, _ = legendre_table(self.k, xi.T)
        sig = self.multi_indices
        out = np.ones((sig.shape[0], xi.shape[0]))
        for i in range(self.dim):
            out *= vals[sig[:, i], i, :]
        return out

    def evaluate(self, coefficients, x) -> float:
        coefficients = np.asarray(coefficients, dtype=np.float64)
        if coefficients.shape != (self.n_dofs,):
            raise ValueError("coefficient vector has wrong length")
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        e = self.mesh.locate(x)
        xi = self.mesh.inverse_map(e, x)
        phi = self.local_values(xi[None, :])[:, 0]
        return float(coefficients[e * self.n_local:(e + 1) * self.n_local] @ phi)
