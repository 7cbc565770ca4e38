r"""Convergence studies and truncation-error diagnostics.

Two kinds of study are supported:

``exact``
    For problems with a known solution, the maximum nodal error
    :math:`e_N^\delta = \max_j |u(x_j) - u_j|` and the order
    :math:`p_N^\delta = \log_2(e_N^\delta / e_{2N}^\delta)`.
``two_mesh``
    Otherwise, the difference :math:`d_N^\delta = \max_j |u_j - z_{2j}|`
    between the solutions on meshes ``N`` and ``2N`` and its order
    :math:`q_N^\delta = \log_2(d_N^\delta / d_{2N}^\delta)`.

In both cases the uniform row takes the maximum over delta for each ``N``
and computes its order the same way.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from caputo_bvp.discretize import assemble
from caputo_bvp.fracpoly import FracPoly, evaluate
from caputo_bvp.linsolve import DiscreteSolution, solve
from caputo_bvp.model import FractionalBVP

__all__ = [
    "MODES",
    "Cell",
    "ConvergenceTable",
    "max_error",
    "order",
    "two_mesh_difference",
    "run_study",
    "truncation_profile",
    "loglog_slope",
    "check_doubling",
]

MODES = ("exact", "two_mesh")
ProblemBuilder = Callable[[float], FractionalBVP]


def max_error(sol: DiscreteSolution, exact: FracPoly) -> float:
    """``max_j |u(x_j) - u_j|``."""
    if exact is None:
        raise ValueError("max_error needs an exact solution")
    return float(np.max(np.abs(evaluate(exact, sol.x) - sol.values)))


def order(e_N: float, e_2N: float) -> float:
    """Observed order ``log2(e_N / e_2N)``; both arguments must be positive."""
    if not (e_N > 0.0 and e_2N > 0.0):
        raise ValueError(f"order needs positive errors, got {e_N!r} and {e_2N!r}")
    return math.log2(e_N / e_2N)


def _coincident_difference(coarse: DiscreteSolution, fine: DiscreteSolution) -> float:
    if fine.N != 2 * coarse.N:
        raise ValueError(f"fine mesh must have 2N = {2 * coarse.N} intervals, got {fine.N}")
    return float(np.max(np.abs(coarse.values - fine.values[::2])))


def two_mesh_difference(p: FractionalBVP, N: int, solver: str = "lu") -> float:
    """``max_j |u_j - z_{2j}|`` for the solutions ``u`` on ``N`` and ``z`` on ``2N``."""
    coarse = solve(assemble(p, N), solver)
    fine = solve(assemble(p, 2 * N), solver)
    return _coincident_difference(coarse, fine)


def check_doubling(Ns: Sequence[int]) -> list[int]:
    """Validate that ``Ns`` is non-empty and each entry is twice the previous one."""
    Ns = [int(n) for n in Ns]
    if not Ns:
        raise ValueError("need at least one mesh size")
    if Ns[0] < 4:
        raise ValueError(f"mesh sizes must be >= 4, got {Ns[0]}")
    for a, b in zip(Ns, Ns[1:]):
        if b != 2 * a:
            raise ValueError(f"mesh sizes must double: {a} is followed by {b}")
    return Ns


@dataclass(frozen=True)
class Cell:
    value: float
    order: float | None = None


@dataclass(frozen=True)
class ConvergenceTable:
    """Errors (or two-mesh differences) and orders on a ``delta x N`` grid.

    ``entries[(delta, N)]`` and ``uniform[N]`` are :class:`Cell` objects.
    An order is present only if the value at ``2N`` was computed; the
    ``extra`` mapping keeps values computed beyond ``Ns`` for that purpose.
    """

    mode: str
    deltas: tuple[float, ...]
    Ns: tuple[int, ...]
    entries: dict[tuple[float, int], Cell]
    uniform: dict[int, Cell]
    extra: dict[tuple[float, int], float] = field(default_factory=dict)

    def value(self, delta: float, N: int) -> float:
        return self.entries[(delta, N)].value

    def order(self, delta: float, N: int) -> float | None:
        return self.entries[(delta, N)].order

    @property
    def label(self) -> str:
        return "error" if self.mode == "exact" else "difference"

    def to_csv(self) -> str:
        """Long form: ``delta,N,<value>,order`` with a final ``uniform`` block.

        Numbers use scientific notation with 6 significant digits; a missing
        order is an empty field.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "N", self.label, "order"])

        def fmt(c: Cell) -> list[str]:
            return [f"{c.value:.5E}", "" if c.order is None else f"{c.order:.5E}"]

        for d in self.deltas:
            for n in self.Ns:
                w.writerow([f"{d:g}", n, *fmt(self.entries[(d, n)])])
        for n in self.Ns:
            w.writerow(["uniform", n, *fmt(self.uniform[n])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        def cell(c: Cell) -> dict:
            return {"value": c.value, "order": c.order}

        return {
            "mode": self.mode,
            "deltas": list(self.deltas),
            "Ns": list(self.Ns),
            "entries": [
                {"delta": d, "N": n, **cell(self.entries[(d, n)])}
                for d in self.deltas
                for n in self.Ns
            ],
            "uniform": [{"N": n, **cell(self.uniform[n])} for n in self.Ns],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_layout(self) -> str:
        """Wide text layout: per delta a row of values then a row of orders, uniform last."""
        name = "e_N" if self.mode == "exact" else "d_N"
        oname = "p_N" if self.mode == "exact" else "q_N"
        head = ["delta", ""] + [f"N={n}" for n in self.Ns]
        rows = [head]

        def pair(lab: str, cells: list[Cell]) -> None:
            rows.append([lab, name] + [f"{c.value:.3E}" for c in cells])
            rows.append(["", oname] + ["" if c.order is None else f"{c.order:.3f}" for c in cells])

        for d in self.deltas:
            pair(f"{d:g}", [self.entries[(d, n)] for n in self.Ns])
        pair("uniform", [self.uniform[n] for n in self.Ns])
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        return "\n".join(
            "  ".join(s.rjust(wd) for s, wd in zip(r, widths)).rstrip() for r in rows
        ) + "\n"


def _solve_sizes(mode: str, Ns: list[int], extend: bool) -> list[int]:
    top = Ns[-1] * (2 if extend else 1)
    if mode == "two_mesh":
        top *= 2
    sizes = list(Ns)
    while sizes[-1] < top:
        sizes.append(2 * sizes[-1])
    return sizes


def _delta_values(
    builder: ProblemBuilder, delta: float, mode: str, sizes: list[int], solver: str
) -> dict[int, float]:
    """Error or two-mesh difference at every size whose inputs were solved."""
    p = builder(delta)
    if mode == "exact" and p.exact is None:
        raise ValueError(f"exact mode needs an exact solution (delta = {delta:g})")
    sols = {n: solve(assemble(p, n), solver) for n in sizes}
    if mode == "exact":
        return {n: max_error(sols[n], p.exact) for n in sizes}
    return {n: _coincident_difference(sols[n], sols[2 * n]) for n in sizes if 2 * n in sols}


def _delta_values_task(args) -> dict[int, float]:
    return _delta_values(*args)


def run_study(
    builder: ProblemBuilder,
    deltas: Iterable[float],
    Ns: Sequence[int],
    mode: str = "exact",
    solver: str = "lu",
    *,
    extend: bool = False,
    jobs: int = 1,
) -> ConvergenceTable:
    """Run a convergence study over ``deltas x Ns``.

    Each delta is solved once per mesh size. With ``extend`` the study also
    solves the meshes needed for an order at ``max(Ns)`` (``2 max(Ns)`` in
    exact mode, ``4 max(Ns)`` in two-mesh mode); without it the last column
    has no order. ``jobs > 1`` distributes deltas over processes, which
    requires a picklable ``builder``; the result does not depend on ``jobs``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    deltas = tuple(float(d) for d in deltas)
    if not deltas:
        raise ValueError("need at least one delta")
    Ns = check_doubling(Ns)
    sizes = _solve_sizes(mode, Ns, extend)
    tasks = [(builder, d, mode, sizes, solver) for d in deltas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_delta_values_task, tasks))
    else:
        results = [_delta_values_task(t) for t in tasks]
    values = dict(zip(deltas, results))

    def make_cell(series: dict[int, float], n: int) -> Cell:
        nxt = series.get(2 * n)
        return Cell(series[n], None if nxt is None else order(series[n], nxt))

    entries = {(d, n): make_cell(values[d], n) for d in deltas for n in Ns}
    avail = sorted(set.intersection(*(set(v) for v in values.values())))
    umax = {n: max(values[d][n] for d in deltas) for n in avail}
    uniform = {n: make_cell(umax, n) for n in Ns}
    extra = {(d, n): v for d in deltas for n, v in values[d].items() if n not in Ns}
    return ConvergenceTable(mode, deltas, tuple(Ns), entries, uniform, extra)


def truncation_profile(p: FractionalBVP, N: int) -> np.ndarray:
    r"""Truncation error :math:`\tau = A u|_{\text{mesh}} - \text{rhs}`."""
    if p.exact is None:
        raise ValueError("truncation_profile needs an exact solution")
    sys = assemble(p, N)
    tau = sys.A @ evaluate(p.exact, sys.mesh.nodes) - sys.rhs
    tau.flags.writeable = False
    return tau


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of ``log|y|`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need at least two matching points")
    if np.any(x <= 0) or np.any(y == 0):
        raise ValueError("log-log fit needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
