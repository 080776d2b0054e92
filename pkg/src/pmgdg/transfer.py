"""Injection prolongation between nested Legendre spaces and inherited operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .dg_space import DgSpace
from .linalg import CsrMatrix


@dataclass(frozen=True, eq=False)
class TransferPair:
    P: CsrMatrix
    R: CsrMatrix
    coarse_index: np.ndarray

    def prolong(self, v: np.ndarray) -> np.ndarray:
        return linalg.spmv(self.P, v)

    def restrict(self, r: np.ndarray) -> np.ndarray:
        return linalg.spmv(self.R, r)


def _check_nested(space_fine: DgSpace, space_coarse: DgSpace):
    if space_fine.mesh is not space_coarse.mesh:
        raise ValueError("spaces must live on the same mesh")
    if space_coarse.k > space_fine.k:
        raise ValueError("coarse degree exceeds fine degree")


def build_transfer(space_fine: DgSpace, space_coarse: DgSpace) -> TransferPair:
    _check_nested(space_fine, space_coarse)
    idx = space_fine.coarse_dofs(space_coarse.k)
    n_c = idx.size
    P = linalg.from_coo(idx, np.arange(n_c), np.ones(n_c), (space_fine.n_dofs, n_c), drop_tol=None)
    R = linalg.from_coo(np.arange(n_c), idx, np.ones(n_c), (n_c, space_fine.n_dofs), drop_tol=None)
    return TransferPair(P, R, idx)


def extract_inherited(A_fine: CsrMatrix, space_fine: DgSpace, space_coarse: DgSpace) -> CsrMatrix:
    """Principal submatrix of ``A_fine`` on the nested coarse DOFs (equals ``P^T A P``)."""
    _check_nested(space_fine, space_coarse)
    idx = space_fine.coarse_dofs(space_coarse.k)
    sub = A_fine.to_scipy()[idx][:, idx]
    return linalg.from_scipy(sub, drop_tol=None)
