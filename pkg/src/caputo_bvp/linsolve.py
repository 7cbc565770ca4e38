"""Solvers for the assembled lower Hessenberg system.

* :func:`solve_lu` -- dense LU with partial pivoting (LAPACK), O(N**3). Default.
* :func:`solve_forward` -- O(N**2) shooting recurrence ``u_j = p_j + q_j u_0``
  closed by the last row. Cheap but it amplifies rounding badly for delta
  near 1, so it is guarded and falls back to :func:`solve_lu`.
* :func:`solve_hessenberg` -- O(N**2) Gaussian elimination with partial
  pivoting that exploits the single nonzero superdiagonal. Stable.

Every solve checks its residual against
``1e-9 (1 + |rhs|) + 64 eps |A| |u|`` in the max norm. The second term is
the rounding floor of any backward-stable solver; it only matters for large
N, where the entries of A grow like N**delta.
"""

from __future__ import annotations

import csv
import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import IO

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve_triangular

from caputo_bvp.discretize import AssembledSystem, UniformMesh
from caputo_bvp.fracpoly import FracPoly, evaluate

__all__ = [
    "DiscreteSolution",
    "SingularMatrixError",
    "ResidualError",
    "SOLVERS",
    "solve",
    "solve_lu",
    "solve_forward",
    "solve_hessenberg",
    "residual_limit",
    "write_solution_csv",
]

log = logging.getLogger(__name__)

RESIDUAL_RTOL = 1e-9
ROUNDING_FACTOR = 64.0
PIVOT_FLOOR = 1e-300
CLOSURE_RTOL = 1e-8
_EPS = float(np.finfo(float).eps)


class SingularMatrixError(np.linalg.LinAlgError):
    """A pivot vanished; the problem data most likely violate the hypotheses."""


class ResidualError(ArithmeticError):
    """The computed solution does not satisfy the residual bound."""


@dataclass(frozen=True)
class DiscreteSolution:
    mesh: UniformMesh
    values: np.ndarray
    residual: float = 0.0
    solver: str = ""

    def __post_init__(self):
        if self.values.shape != (self.mesh.N + 1,):
            raise ValueError(
                f"expected {self.mesh.N + 1} nodal values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("nodal values must be finite")

    @property
    def x(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def N(self) -> int:
        return self.mesh.N


def residual_limit(sys: AssembledSystem, u: np.ndarray) -> float:
    rhs_norm = float(np.max(np.abs(sys.rhs)))
    u_norm = float(np.max(np.abs(u)))
    return RESIDUAL_RTOL * (1.0 + rhs_norm) + ROUNDING_FACTOR * _EPS * sys.norm_A * u_norm


def _residual(sys: AssembledSystem, u: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        r = sys.A.dense() @ u - sys.rhs
    return float(np.max(np.abs(r)))


def _residual_ok(sys: AssembledSystem, u: np.ndarray) -> tuple[bool, float]:
    if not np.all(np.isfinite(u)):
        return False, float("inf")
    res = _residual(sys, u)
    return res <= residual_limit(sys, u), res


def _finish(sys: AssembledSystem, u: np.ndarray, name: str) -> DiscreteSolution:
    ok, res = _residual_ok(sys, u)
    if not ok:
        raise ResidualError(
            f"{name}: residual {res:.3e} exceeds bound {residual_limit(sys, u):.3e}"
        )
    u.flags.writeable = False
    return DiscreteSolution(sys.mesh, u, res, name)


def solve_lu(sys: AssembledSystem) -> DiscreteSolution:
    """Dense LU with partial pivoting."""
    lu, piv = lu_factor(sys.A.dense(), check_finite=False)
    pivots = np.abs(np.diagonal(lu))
    if np.min(pivots) < PIVOT_FLOOR:
        raise SingularMatrixError(
            f"pivot {int(np.argmin(pivots))} has magnitude {np.min(pivots):.3e}; "
            "matrix is numerically singular"
        )
    u = lu_solve((lu, piv), sys.rhs, check_finite=False)
    return _finish(sys, u, "lu")


def _shooting(a: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float, float]:
    n = a.shape[0]
    N = n - 1
    p = np.zeros(n)
    q = np.zeros(n)
    q[0] = 1.0
    with np.errstate(all="ignore"):
        for j in range(N):
            row = a[j, : j + 1]
            sup = a[j, j + 1]
            p[j + 1] = (rhs[j] - row @ p[: j + 1]) / sup
            q[j + 1] = -(row @ q[: j + 1]) / sup
        closure = float(a[N] @ q)
        scale = float(np.max(np.abs(p) + np.abs(q)))
        u0 = (rhs[N] - a[N] @ p) / closure
        u = p + q * u0
    return u, closure, scale


def solve_forward(sys: AssembledSystem) -> DiscreteSolution:
    """O(N**2) shooting solve, falling back to :func:`solve_lu` when unreliable.

    Writes ``u_j = p_j + q_j u_0``, uses rows ``0..N-1`` to step ``p`` and
    ``q`` forward through the superdiagonal and row ``N`` to fix ``u_0``.
    Falls back if a superdiagonal entry vanishes, if the closure coefficient
    is tiny relative to ``max(|p_j| + |q_j|)``, or if the result misses the
    residual bound.
    """
    a = sys.A.dense()
    N = sys.N
    if np.any(np.diagonal(a, 1)[:N] == 0.0):
        log.info("solve_forward: zero superdiagonal entry, using LU")
        return solve_lu(sys)
    u, closure, scale = _shooting(a, np.asarray(sys.rhs))
    if not np.isfinite(closure) or not np.isfinite(scale) or abs(closure) < CLOSURE_RTOL * scale:
        log.info("solve_forward: ill-conditioned closure, using LU")
        return solve_lu(sys)
    ok, res = _residual_ok(sys, u)
    if not ok:
        log.info("solve_forward: residual %.3e too large, using LU", res)
        return solve_lu(sys)
    u.flags.writeable = False
    return DiscreteSolution(sys.mesh, u, res, "forward")


def solve_hessenberg(sys: AssembledSystem) -> DiscreteSolution:
    """O(N**2) pivoted elimination on the transpose, which is upper Hessenberg.

    Factor ``B = A^T`` as ``M B = U`` where ``M`` is a product of adjacent
    row swaps and single-entry eliminations; then ``A u = f`` becomes
    ``U^T y = f``, ``u = M^T y``.
    """
    b = np.ascontiguousarray(sys.A.dense().T)
    n = b.shape[0]
    mult = np.zeros(n - 1)
    swapped = np.zeros(n - 1, dtype=bool)
    for k in range(n - 1):
        if abs(b[k + 1, k]) > abs(b[k, k]):
            b[[k, k + 1], k:] = b[[k + 1, k], k:]
            swapped[k] = True
        if abs(b[k, k]) < PIVOT_FLOOR:
            raise SingularMatrixError(f"pivot {k} vanished; matrix is numerically singular")
        m = b[k + 1, k] / b[k, k]
        mult[k] = m
        if m != 0.0:
            b[k + 1, k:] -= m * b[k, k:]
    if abs(b[n - 1, n - 1]) < PIVOT_FLOOR:
        raise SingularMatrixError(f"pivot {n - 1} vanished; matrix is numerically singular")
    y = solve_triangular(b, np.array(sys.rhs), trans="T", lower=False, check_finite=False)
    for k in range(n - 2, -1, -1):
        y[k] -= mult[k] * y[k + 1]
        if swapped[k]:
            y[k], y[k + 1] = y[k + 1], y[k]
    return _finish(sys, y, "hessenberg")


SOLVERS: dict[str, Callable[[AssembledSystem], DiscreteSolution]] = {
    "lu": solve_lu,
    "forward": solve_forward,
    "hessenberg": solve_hessenberg,
}


def solve(sys: AssembledSystem, method: str = "lu") -> DiscreteSolution:
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown solver {method!r}; choose from {sorted(SOLVERS)}") from None
    return fn(sys)


def write_solution_csv(sol: DiscreteSolution, fh: IO[str], exact: FracPoly | None = None) -> None:
    """Write ``x, u_numeric`` (plus ``u_exact, error`` if ``exact`` is given)."""
    w = csv.writer(fh, lineterminator="\n")
    x = sol.x
    if exact is None:
        w.writerow(["x", "u_numeric"])
        for xi, ui in zip(x, sol.values):
            w.writerow([f"{xi:.5E}", f"{ui:.5E}"])
        return
    ue = evaluate(exact, x)
    w.writerow(["x", "u_numeric", "u_exact", "error"])
    for xi, ui, ei in zip(x, sol.values, ue):
        w.writerow([f"{xi:.5E}", f"{ui:.5E}", f"{ei:.5E}", f"{abs(ei - ui):.5E}"])
