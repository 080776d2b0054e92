"""p-multigrid solvers for symmetric interior penalty DG discretizations of the Poisson problem."""

from .assembly import PenaltyConfig, assemble_level, assemble_load, assemble_stiffness
from .dg_space import DgSpace
from .krylov import GmresConfig, gmres_solve
from .linalg import CsrMatrix
from .mesh import TensorMesh, build_mesh
from .multigrid import (HierarchyConfig, MgHierarchy, build_hierarchy, iterate_to_tolerance,
                        operator_complexity, two_level, wcycle)

__all__ = [
    "CsrMatrix", "DgSpace", "GmresConfig", "HierarchyConfig", "MgHierarchy", "PenaltyConfig",
    "TensorMesh", "assemble_level", "assemble_load", "assemble_stiffness", "build_hierarchy",
    "build_mesh", "gmres_solve", "iterate_to_tolerance", "operator_complexity", "two_level", "wcycle",
]
__version__ = "0.1.0"
