"""Boundary value problem definition, admissibility checks and built-in problems.

The problem is

    -D_*^delta u + b u' + c u = f   on (0, 1),
    u(0) - alpha0 u'(0) = gamma0,   u(1) + alpha1 u'(1) = gamma1,

with 1 < delta < 2. The discrete comparison principle, and with it the
monotonicity of the difference scheme, needs alpha0 >= 1/(delta - 1),
alpha1 >= 0 and c >= 0.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from caputo_bvp.fracpoly import (
    FracPoly,
    derivative,
    evaluate,
    fracpoly_from_json,
    fracpoly_to_json,
    manufactured_rhs,
    safe_eval,
)

__all__ = [
    "Coefficient",
    "FractionalBVP",
    "ValidationError",
    "ValidationReport",
    "validate",
    "require_valid_delta",
    "sample",
    "test_problem_1",
    "test_problem_2",
    "builtin_problem",
    "load_problem",
    "problem_from_dict",
    "problem_to_dict",
]

Coefficient = Union[float, FracPoly, Callable[[Any], Any]]

#: number of equispaced points on which c >= 0 is checked
C_CHECK_POINTS = 1001


def sample(fn: Coefficient, x: np.ndarray) -> np.ndarray:
    """Evaluate a coefficient function at every node of ``x``.

    Plain numbers are constant coefficients. Black-box callables are first
    tried on the whole array and evaluated point by point if they do not
    broadcast.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(fn, (int, float, np.number)):
        return np.full_like(x, float(fn))
    if isinstance(fn, FracPoly):
        return np.asarray(evaluate(fn, x), dtype=float)
    try:
        out = np.asarray(fn(x), dtype=float)
        if out.shape == x.shape:
            return out
        if out.ndim == 0:
            return np.full_like(x, float(out))
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(xi))) for xi in x])


@dataclass(frozen=True)
class FractionalBVP:
    """Data of one problem instance. ``exact`` is the known solution, if any."""

    delta: float
    b: Coefficient
    c: Coefficient
    f: Coefficient
    alpha0: float
    alpha1: float
    gamma0: float
    gamma1: float
    exact: FracPoly | None = None
    name: str = ""


@dataclass(frozen=True)
class ValidationFailure:
    condition: str
    message: str
    witness: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: dict[str, bool]
    failures: tuple[ValidationFailure, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "all admissibility conditions hold"
        return "; ".join(f.message for f in self.failures)


class ValidationError(ValueError):
    """A problem violates the admissibility conditions."""

    def __init__(self, report: ValidationReport):
        super().__init__(report.summary())
        self.report = report

    def __reduce__(self):
        return (type(self), (self.report,))


def _delta_failure(delta: float) -> ValidationFailure | None:
    if 1.0 < delta < 2.0:
        return None
    return ValidationFailure("delta in (1,2)", f"delta = {delta:g} is outside (1, 2)")


def require_valid_delta(delta: float) -> None:
    """Raise :class:`ValidationError` unless ``1 < delta < 2``."""
    fail = _delta_failure(delta)
    if fail is not None:
        raise ValidationError(ValidationReport({fail.condition: False}, (fail,)))


def validate(p: FractionalBVP) -> ValidationReport:
    """Check delta in (1, 2), alpha0 >= 1/(delta-1), alpha1 >= 0 and c >= 0 on a grid."""
    checks: dict[str, bool] = {}
    failures: list[ValidationFailure] = []

    fail = _delta_failure(p.delta)
    checks["delta in (1,2)"] = fail is None
    if fail is not None:
        failures.append(fail)
        # alpha0 bound is meaningless without a valid delta
        return ValidationReport(checks, tuple(failures))

    bound = 1.0 / (p.delta - 1.0)
    ok = p.alpha0 >= bound
    checks["alpha0 >= 1/(delta-1)"] = ok
    if not ok:
        failures.append(
            ValidationFailure(
                "alpha0 >= 1/(delta-1)",
                f"alpha0 < 1/(delta-1): alpha0 = {p.alpha0:g} but 1/(delta-1) = {bound:g}",
            )
        )

    ok = p.alpha1 >= 0.0
    checks["alpha1 >= 0"] = ok
    if not ok:
        failures.append(ValidationFailure("alpha1 >= 0", f"alpha1 = {p.alpha1:g} is negative"))

    xs = np.linspace(0.0, 1.0, C_CHECK_POINTS)
    cs = sample(p.c, xs)
    bad = np.flatnonzero(~(cs >= 0.0))
    ok = bad.size == 0
    checks["c >= 0"] = ok
    if not ok:
        x0 = float(xs[bad[0]])
        failures.append(
            ValidationFailure("c >= 0", f"c(x) < 0 at x = {x0:g} (c = {cs[bad[0]]:g})", x0)
        )

    for name in ("gamma0", "gamma1", "alpha0", "alpha1"):
        if not math.isfinite(getattr(p, name)):
            checks[f"{name} finite"] = False
            failures.append(ValidationFailure(f"{name} finite", f"{name} is not finite"))

    return ValidationReport(checks, tuple(failures))


# built-in problems ---------------------------------------------------------------


def _tp1_solution(delta: float) -> FracPoly:
    return FracPoly(
        [(1.0, delta), (1.0, 2.0 * delta - 1.0), (1.0, 0.0), (3.0, 1.0),
         (-7.0, 2.0), (4.0, 3.0), (1.0, 4.0)]
    )


def test_problem_1(
    delta: float, alpha0: float | None = None, alpha1: float = 1.0
) -> FractionalBVP:
    """Variable-coefficient problem with a manufactured, weakly singular solution.

    ``b = x**2``, ``c = 1 + x`` and ``u = x**delta + x**(2 delta - 1) + 1 + 3x - 7x**2
    + 4x**3 + x**4``; ``f``, ``gamma0`` and ``gamma1`` are derived from ``u``.
    ``alpha0`` defaults to the smallest admissible value ``1/(delta - 1)``.
    """
    require_valid_delta(delta)
    if alpha0 is None:
        alpha0 = 1.0 / (delta - 1.0)
    u = _tp1_solution(delta)
    b = FracPoly([(1.0, 2.0)])
    c = FracPoly([(1.0, 0.0), (1.0, 1.0)])
    du = derivative(u, 1)
    return FractionalBVP(
        delta=delta,
        b=b,
        c=c,
        f=manufactured_rhs(u, b, c, delta),
        alpha0=alpha0,
        alpha1=alpha1,
        gamma0=evaluate(u, 0.0) - alpha0 * evaluate(du, 0.0),
        gamma1=evaluate(u, 1.0) + alpha1 * evaluate(du, 1.0),
        exact=u,
        name="tp1",
    )


# keep pytest from collecting the builder as a test
test_problem_1.__test__ = False  # type: ignore[attr-defined]


def test_problem_2(
    delta: float, alpha0: float | None = None, alpha1: float = 0.0
) -> FractionalBVP:
    """Constant-coefficient problem ``-D u + 2u' + 3u = 1.25`` with Dirichlet ``u(1) = 1.7``.

    The exact solution is unknown; errors are estimated by two-mesh differences.
    A nonzero ``alpha1`` turns the right boundary condition into a Robin one
    with the same data.
    """
    require_valid_delta(delta)
    if alpha0 is None:
        alpha0 = 1.0 / (delta - 1.0)
    return FractionalBVP(
        delta=delta,
        b=FracPoly([(2.0, 0.0)]),
        c=FracPoly([(3.0, 0.0)]),
        f=FracPoly([(1.25, 0.0)]),
        alpha0=alpha0,
        alpha1=alpha1,
        gamma0=0.4,
        gamma1=1.7,
        exact=None,
        name="tp2",
    )


test_problem_2.__test__ = False  # type: ignore[attr-defined]

BUILTIN = {"tp1": test_problem_1, "tp2": test_problem_2}


def builtin_problem(name: str, delta: float, **overrides: Any) -> FractionalBVP:
    try:
        builder = BUILTIN[name.lower()]
    except KeyError:
        raise ValueError(f"unknown built-in problem {name!r}; choose from {sorted(BUILTIN)}") from None
    return builder(delta, **overrides)


# JSON problem files --------------------------------------------------------------

_EXPR_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "sinh": np.sinh, "cosh": np.cosh,
    "tanh": np.tanh, "pi": math.pi, "e": math.e,
}


def _coefficient_from_json(value: Any, delta: float, what: str) -> Coefficient:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return FracPoly([(float(value), 0.0)])
    if isinstance(value, list):
        return fracpoly_from_json(value, delta)
    if isinstance(value, str):
        expr = value
        names = dict(_EXPR_FUNCS, delta=delta)

        def fn(x):
            return safe_eval(expr, dict(names, x=np.asarray(x, dtype=float)))

        fn(np.linspace(0.0, 1.0, 3))  # fail early on a bad expression
        fn.expr = expr  # type: ignore[attr-defined]
        return fn
    raise ValueError(f"{what}: expected a number, a term array or an expression string")


def problem_from_dict(data: Mapping[str, Any], delta: float | None = None) -> FractionalBVP:
    """Build a problem from its JSON form; ``delta`` overrides the stored order.

    Term powers written as strings (``"delta"``, ``"2*delta-1"``) are resolved
    against the effective delta. If ``f`` is absent and ``exact`` is present,
    ``f`` is manufactured from the exact solution.
    """
    try:
        d = float(data["delta"] if delta is None else delta)
        require_valid_delta(d)
        exact = data.get("exact")
        exact_poly = fracpoly_from_json(exact, d) if exact is not None else None
        b = _coefficient_from_json(data.get("b", 0.0), d, "b")
        c = _coefficient_from_json(data.get("c", 0.0), d, "c")
        if "f" in data:
            f = _coefficient_from_json(data["f"], d, "f")
        elif exact_poly is not None:
            if not (isinstance(b, FracPoly) and isinstance(c, FracPoly)):
                raise ValueError("manufacturing f needs b and c as term arrays")
            f = manufactured_rhs(exact_poly, b, c, d)
        else:
            raise ValueError("problem needs 'f' or an 'exact' solution")
        alpha0 = float(data["alpha0"])
        alpha1 = float(data["alpha1"])
        du = derivative(exact_poly, 1) if exact_poly is not None else None
        if "gamma0" in data:
            gamma0 = float(data["gamma0"])
        elif exact_poly is not None:
            gamma0 = evaluate(exact_poly, 0.0) - alpha0 * evaluate(du, 0.0)
        else:
            raise KeyError("gamma0")
        if "gamma1" in data:
            gamma1 = float(data["gamma1"])
        elif exact_poly is not None:
            gamma1 = evaluate(exact_poly, 1.0) + alpha1 * evaluate(du, 1.0)
        else:
            raise KeyError("gamma1")
    except KeyError as exc:
        raise ValueError(f"problem is missing required field {exc.args[0]!r}") from None
    except (TypeError, AttributeError) as exc:
        raise ValueError(f"malformed problem: {exc}") from None
    return FractionalBVP(
        delta=d, b=b, c=c, f=f, alpha0=alpha0, alpha1=alpha1,
        gamma0=gamma0, gamma1=gamma1, exact=exact_poly, name=str(data.get("name", "")),
    )


def load_problem(path: str | Path, delta: float | None = None) -> FractionalBVP:
    """Read a problem JSON file. Raises ``OSError`` or ``ValueError``."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a JSON object")
    return problem_from_dict(data, delta)


def _coefficient_to_json(fn: Coefficient) -> Any:
    if isinstance(fn, (int, float)):
        return float(fn)
    if isinstance(fn, FracPoly):
        return fracpoly_to_json(fn)
    if hasattr(fn, "expr"):
        return fn.expr
    raise ValueError("black-box coefficient functions cannot be serialised")


def problem_to_dict(p: FractionalBVP) -> dict[str, Any]:
    out: dict[str, Any] = {
        "delta": p.delta,
        "b": _coefficient_to_json(p.b),
        "c": _coefficient_to_json(p.c),
        "alpha0": p.alpha0,
        "alpha1": p.alpha1,
        "gamma0": p.gamma0,
        "gamma1": p.gamma1,
    }
    if p.exact is not None:
        out["exact"] = fracpoly_to_json(p.exact)
    if not (p.exact is not None and hasattr(p.f, "caputo")):
        out["f"] = _coefficient_to_json(p.f)
    if p.name:
        out["name"] = p.name
    return out
