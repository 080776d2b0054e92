"""p-multigrid hierarchy, two-level and W-cycle iterations."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import linalg
from .assembly import PenaltyConfig, assemble_mass_diag, assemble_stiffness
from .dg_space import DgSpace
from .linalg import CsrMatrix, ConvergenceError, DirectSolver
from .smoother import OMEGA_METHODS, OMEGA_SAFETY, chebyshev4_sweep, jacobi_sweep, select_omega
from .transfer import TransferPair, build_transfer, extract_inherited

FORMS = ("inherited", "non-inherited")


class DivergenceError(RuntimeError):
    pass


def parse_m_rule(rule) -> Callable[[int, int], int]:
    """Map a smoothing-step rule to ``m(k, p)``.

    Accepted: ``"k"``, ``"p"``, an integer (constant), ``"p^g"`` meaning
    ``ceil(p**g)``.
    """
    if isinstance(rule, (int, np.integer)):
        return lambda k, p, _m=int(rule): _m
    text = str(rule).strip().replace(" ", "")
    if text == "k":
        return lambda k, p: k
    if text == "p":
        return lambda k, p: p
    if text.isdigit():
        return lambda k, p, _m=int(text): _m
    match = re.fullmatch(r"(?:ceil\()?p\^([0-9.]+)\)?", text)
    if match:
        g = float(match.group(1))
        # guard against float noise such as 4**1.5 = 8.000000000000002
        return lambda k, p, _g=g: int(math.ceil(round(p**_g, 9)))
    raise ValueError(f"unrecognised m rule {rule!r}")


@dataclass(frozen=True)
class HierarchyConfig:
    p: int
    K: int | None = None
    form: str = "inherited"
    m_rule: object = None
    alpha0: float = 10.0
    smoother: str = "chebyshev4"
    omega_safety: float = OMEGA_SAFETY
    omega_method: str = "gershgorin"
    seed: int = 0

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("need p >= 2 for a hierarchy")
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")
        if not 2 <= self.levels <= self.p:
            raise ValueError("number of levels K must satisfy 2 <= K <= p")
        if self.smoother not in ("chebyshev4", "jacobi"):
            raise ValueError("smoother must be chebyshev4 or jacobi")
        if self.omega_method not in OMEGA_METHODS:
            raise ValueError(f"omega_method must be one of {OMEGA_METHODS}")

    @property
    def levels(self) -> int:
        return self.p if self.K is None else self.K

    @property
    def coarsest(self) -> int:
        return self.p - self.levels + 1

    @property
    def rule(self):
        if self.m_rule is None:
            return "p" if self.form == "inherited" else "k"
        return self.m_rule


@dataclass(eq=False)
class Level:
    k: int
    space: DgSpace
    A: CsrMatrix
    D_diag: np.ndarray
    M_diag: np.ndarray
    m: int
    omega: float | None = None
    transfer: TransferPair | None = None  # to level k - 1


@dataclass(eq=False)
class MgHierarchy:
    config: HierarchyConfig
    levels: dict
    coarse_solver: DirectSolver
    _extra_solvers: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.config.p

    @property
    def coarsest(self) -> int:
        return self.config.coarsest

    @property
    def finest(self) -> Level:
        return self.levels[self.p]

    def solver_for(self, k: int) -> DirectSolver:
        if k == self.coarsest:
            return self.coarse_solver
        if k not in self._extra_solvers:
            self._extra_solvers[k] = DirectSolver(self.levels[k].A)
        return self._extra_solvers[k]


def build_hierarchy(space_p: DgSpace, config: HierarchyConfig) -> MgHierarchy:
    if space_p.k != config.p:
        raise ValueError("space degree does not match config.p")
    mesh = space_p.mesh
    penalty = PenaltyConfig(config.alpha0)
    m_of = parse_m_rule(config.rule)
    A_p = assemble_stiffness(space_p, penalty)
    levels = {}
    spaces = {config.p: space_p}
    for k in range(config.p, config.coarsest - 1, -1):
        space = spaces[k] if k == config.p else DgSpace(mesh, k)
        spaces[k] = space
        if k == config.p:
            A = A_p
        elif config.form == "inherited":
            A = extract_inherited(A_p, space_p, space)
        else:
            A = assemble_stiffness(space, penalty)
        D = A.diagonal()
        levels[k] = Level(k, space, A, D, assemble_mass_diag(space), m_of(k, config.p))
    for k in range(config.p, config.coarsest, -1):
        lvl = levels[k]
        lvl.transfer = build_transfer(spaces[k], spaces[k - 1])
        lvl.omega = select_omega(lvl.A, lvl.D_diag, seed=config.seed, safety=config.omega_safety,
                                 method=config.omega_method)
    coarse = DirectSolver(levels[config.coarsest].A)
    return MgHierarchy(config, levels, coarse)


def _smooth(h: MgHierarchy, lvl: Level, f, z, m):
    sweep = chebyshev4_sweep if h.config.smoother == "chebyshev4" else jacobi_sweep
    return sweep(lvl.A, lvl.D_diag, lvl.omega, f, z, m)


def _cycle(h: MgHierarchy, k: int, f, z0, m_override=None, corrections=2, coarsest=None):
    coarsest = h.coarsest if coarsest is None else coarsest
    if k == coarsest:
        return h.solver_for(k).solve(f)
    lvl = h.levels[k]
    m = lvl.m if m_override is None else m_override
    z = _smooth(h, lvl, f, z0, m)
    r = lvl.transfer.restrict(f - linalg.spmv(lvl.A, z))
    e = np.zeros(r.shape)
    for _ in range(corrections):
        e = _cycle(h, k - 1, r, e, m_override, corrections, coarsest)
    z = z + lvl.transfer.prolong(e)
    return _smooth(h, lvl, f, z, m)


def wcycle(hierarchy: MgHierarchy, k: int, f, z0, m=None) -> np.ndarray:
    """One W-cycle at level ``k``; ``m`` overrides the per-level schedule."""
    if k not in hierarchy.levels:
        raise ValueError(f"level {k} not in hierarchy")
    return _cycle(hierarchy, k, np.asarray(f, float), np.asarray(z0, float), m)


def two_level(hierarchy: MgHierarchy, f, z0, m=None) -> np.ndarray:
    """Pre-smooth, exact correction on level ``p - 1``, post-smooth."""
    p = hierarchy.p
    return _cycle(hierarchy, p, np.asarray(f, float), np.asarray(z0, float), m,
                  corrections=1, coarsest=p - 1)


class IterationResult(NamedTuple):
    z: np.ndarray
    iterations: int
    rate: float


def iterate_to_tolerance(method, A: CsrMatrix, f, z0, eps: float = 1e-8, max_iter: int = 500,
                         history: list | None = None) -> IterationResult:
    """Apply ``z <- method(f, z)`` until ``||f - A z|| <= eps ||f - A z0||``.

    The rate is the geometric mean residual reduction per iteration.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    z = np.array(z0, dtype=np.float64)
    r0 = np.linalg.norm(f - linalg.spmv(A, z))
    if r0 == 0.0:
        raise ValueError("initial residual is zero")
    if history is not None:
        history.append(r0)
    rn = r0
    for it in range(1, max_iter + 1):
        z = method(f, z)
        rn = np.linalg.norm(f - linalg.spmv(A, z))
        if history is not None:
            history.append(rn)
        if rn > 10.0 * r0 or not np.isfinite(rn):
            raise DivergenceError(f"residual grew to {rn / r0:.3g} x initial after {it} iterations")
        if rn <= eps * r0:
            return IterationResult(z, it, float(np.exp(np.log(rn / r0) / it)))
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations (relative residual {rn / r0:.3e})",
        estimate=float(np.exp(np.log(rn / r0) / max_iter)), iterations=max_iter,
    )


def operator_complexity(hierarchy: MgHierarchy) -> float:
    total = sum(linalg.nnz(lvl.A) for lvl in hierarchy.levels.values())
    return total / linalg.nnz(hierarchy.finest.A)
