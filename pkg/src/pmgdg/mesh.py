"""Uniform Cartesian tensor meshes of a box."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class Face:
    """A mesh face orthogonal to ``axis``.

    Interior faces store ``(T1, T2)`` with ``T1 < T2``; the normal points
    from ``T1`` to ``T2`` (i.e. along ``+e_axis``).  Boundary faces store a
    single element and the outward normal sign.
    """

    axis: int
    kind: str
    elements: tuple
    normal_sign: int

    @property
    def is_interior(self) -> bool:
        return self.kind == "interior"


@dataclass(frozen=True, eq=False)
class TensorMesh:
    dim: int
    lower: tuple
    upper: tuple
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if self.n < 1:
            raise ValueError("need at least one cell per axis")
        widths = np.subtract(self.upper, self.lower)
        if np.any(widths <= 0):
            raise ValueError("degenerate box")
        if not np.allclose(widths, widths[0], rtol=1e-14, atol=0):
            raise ValueError("only cubic boxes give equal edge sizes")

    @property
    def h(self) -> float:
        return (self.upper[0] - self.lower[0]) / self.n

    @property
    def n_elements(self) -> int:
        return self.n**self.dim

    @cached_property
    def grid_coords(self) -> np.ndarray:
        """Integer grid coordinates of every element, shape (N_h, dim); x fastest."""
        e = np.arange(self.n_elements)
        return np.stack([(e // self.n**i) % self.n for i in range(self.dim)], axis=1)

    @cached_property
    def lower_corners(self) -> np.ndarray:
        return np.asarray(self.lower) + self.h * self.grid_coords

    def element_index(self, coords: Sequence[int]) -> int:
        return int(sum(int(c) * self.n**i for i, c in enumerate(coords)))

    @cached_property
    def interior_pairs(self) -> tuple:
        """Per axis, an (n_faces, 2) array of (lower, upper) element pairs."""
        out = []
        for axis in range(self.dim):
            c = self.grid_coords
            mask = c[:, axis] < self.n - 1
            lo = np.nonzero(mask)[0]
            out.append(np.stack([lo, lo + self.n**axis], axis=1))
        return tuple(out)

    @cached_property
    def boundary_elements(self) -> tuple:
        """Per axis, the elements touching the lower and the upper wall."""
        out = []
        for axis in range(self.dim):
            c = self.grid_coords[:, axis]
            out.append((np.nonzero(c == 0)[0], np.nonzero(c == self.n - 1)[0]))
        return tuple(out)

    @cached_property
    def is_interior_element(self) -> np.ndarray:
        c = self.grid_coords
        return np.all((c > 0) & (c < self.n - 1), axis=1)

    def faces(self) -> Iterator[Face]:
        """All faces: interior ones per axis, then boundary ones per axis."""
        for axis, pairs in enumerate(self.interior_pairs):
            for t1, t2 in pairs:
                yield Face(axis, "interior", (int(t1), int(t2)), +1)
        for axis, (low, high) in enumerate(self.boundary_elements):
            for t in low:
                yield Face(axis, "boundary", (int(t),), -1)
            for t in high:
                yield Face(axis, "boundary", (int(t),), +1)

    @property
    def n_faces(self) -> int:
        return self.dim * self.n ** (self.dim - 1) * (self.n + 1)

    def neighbors(self, element: int) -> list:
        """Axis neighbors of an element as (neighbor, axis, side) with side in {-1, +1}."""
        c = self.grid_coords[element]
        out = []
        for axis in range(self.dim):
            if c[axis] > 0:
                out.append((element - self.n**axis, axis, -1))
            if c[axis] < self.n - 1:
                out.append((element + self.n**axis, axis, +1))
        return out

    def affine_map(self, element: int, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.float64)
        if np.any(np.abs(xi) > 1.0 + 1e-14):
            raise ValueError("reference point outside [-1, 1]^d")
        return self.lower_corners[element] + 0.5 * self.h * (xi + 1.0)

    def inverse_map(self, element: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        xi = 2.0 * (x - self.lower_corners[element]) / self.h - 1.0
        if np.any(np.abs(xi) > 1.0 + 1e-12):
            raise ValueError("point lies outside the element")
        return np.clip(xi, -1.0, 1.0)

    def locate(self, x) -> int:
        """Element containing point ``x`` (upper faces belong to the lower element)."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        rel = (x - np.asarray(self.lower)) / self.h
        if np.any(rel < -1e-12) or np.any(rel > self.n + 1e-12):
            raise ValueError("point lies outside the domain")
        coords = np.clip(np.floor(rel).astype(int), 0, self.n - 1)
        return self.element_index(coords)


def build_mesh(dim: int, box=(0.0, 1.0), n_per_axis=1) -> TensorMesh:
    """Uniform mesh with ``n_per_axis`` cells along each axis.

    ``box`` is either a ``(a, b)`` pair applied to every axis or a pair of
    corner sequences.  A sequence of per-axis counts is accepted only when all
    counts agree.
    """
    counts = np.atleast_1d(n_per_axis)
    if counts.size not in (1, dim):
        raise ValueError("need one count or one per axis")
    if np.any(counts != counts[0]):
        raise ValueError("anisotropic cell counts are not supported")
    n = int(counts[0])
    a, b = box
    lower = tuple(np.broadcast_to(np.asarray(a, dtype=float), (dim,)).tolist())
    upper = tuple(np.broadcast_to(np.asarray(b, dtype=float), (dim,)).tolist())
    return TensorMesh(dim, lower, upper, n)
