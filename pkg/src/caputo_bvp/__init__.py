"""Finite difference solver for Caputo two-point boundary value problems.

Solves ``-D_*^delta u + b u' + c u = f`` on ``(0, 1)`` with ``1 < delta < 2``
and Robin boundary conditions, certifies that the discretisation is an
M-matrix, and runs convergence studies.
"""

from caputo_bvp.discretize import (
    AssembledSystem,
    LowerHessenbergMatrix,
    UniformMesh,
    assemble,
    kappa,
    weight,
    weights,
)
from caputo_bvp.fracpoly import FracExpr, FracPoly, caputo, derivative, evaluate, manufactured_rhs
from caputo_bvp.harness import ConvergenceTable, max_error, order, run_study, truncation_profile
from caputo_bvp.linsolve import DiscreteSolution, solve, solve_forward, solve_hessenberg, solve_lu
from caputo_bvp.model import (
    FractionalBVP,
    ValidationError,
    load_problem,
    test_problem_1,
    test_problem_2,
    validate,
)
from caputo_bvp.monotone import MonotonicityReport, certify_m_matrix, eliminate_col0
from caputo_bvp.specfun import beta, gamma

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem",
    "ConvergenceTable",
    "DiscreteSolution",
    "FracExpr",
    "FracPoly",
    "FractionalBVP",
    "LowerHessenbergMatrix",
    "MonotonicityReport",
    "UniformMesh",
    "ValidationError",
    "assemble",
    "beta",
    "caputo",
    "certify_m_matrix",
    "derivative",
    "eliminate_col0",
    "evaluate",
    "gamma",
    "kappa",
    "load_problem",
    "manufactured_rhs",
    "max_error",
    "order",
    "run_study",
    "solve",
    "solve_forward",
    "solve_hessenberg",
    "solve_lu",
    "test_problem_1",
    "test_problem_2",
    "truncation_profile",
    "validate",
    "weight",
    "weights",
]
