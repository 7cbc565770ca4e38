r"""Fractional polynomials: finite sums :math:`\sum_i c_i x^{p_i}` with real powers.

Two flavours share one implementation:

* :class:`FracPoly` -- all powers >= 0, so the function is continuous on
  [0, 1]. Coefficient functions and exact solutions live here.
* :class:`FracExpr` -- arbitrary real powers. Derivatives of a
  :class:`FracPoly` (e.g. ``u''`` with an ``x**(delta - 2)`` term) land here
  and may only be evaluated for ``x > 0`` when a power is negative.

Operations return a :class:`FracPoly` whenever the result has no negative
powers, otherwise a :class:`FracExpr`.

The exact Caputo derivative of order ``1 < sigma < 2`` uses

.. math::

    D_*^\sigma x^p = \frac{\Gamma(p + 1)}{\Gamma(p + 1 - \sigma)} x^{p - \sigma},
    \qquad p > 1,

and annihilates ``1`` and ``x``. :func:`caputo_quadrature_oracle` evaluates
the integral form of the same derivative numerically and serves as an
independent check.
"""

from __future__ import annotations

import ast
import math
import operator
from collections.abc import Callable, Iterable, Mapping
from typing import Any, Union

import numpy as np
from scipy.special import roots_jacobi

from caputo_bvp.specfun import gamma

__all__ = [
    "FracExpr",
    "FracPoly",
    "QuadratureError",
    "monomial",
    "evaluate",
    "derivative",
    "caputo",
    "caputo_quadrature_oracle",
    "manufactured_rhs",
    "fracpoly_from_json",
    "fracpoly_to_json",
    "resolve_power",
]

#: powers closer than this are merged; powers this close to an integer snap to it
POWER_TOL = 1e-12

Number = Union[int, float]


class QuadratureError(RuntimeError):
    """The quadrature oracle could not reach its tolerance."""


def _canonical(terms: Iterable[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    merged: list[list[float]] = []
    for coeff, power in terms:
        coeff = float(coeff)
        power = float(power)
        if not (math.isfinite(coeff) and math.isfinite(power)):
            raise ValueError(f"non-finite term {coeff!r} * x**{power!r}")
        nearest = round(power)
        if abs(power - nearest) <= POWER_TOL:
            power = float(nearest)
        merged.append([power, coeff])
    merged.sort(key=lambda t: t[0])
    out: list[list[float]] = []
    for power, coeff in merged:
        if out and abs(power - out[-1][0]) <= POWER_TOL:
            out[-1][1] += coeff
        else:
            out.append([power, coeff])
    return tuple((c, p) for p, c in out if c != 0.0)


class FracExpr:
    """Immutable finite sum of real-power monomials ``coeff * x**power``."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Iterable[tuple[Number, Number]] = ()):
        canon = _canonical(terms)
        self._check(canon)
        object.__setattr__(self, "_terms", canon)

    @classmethod
    def _check(cls, terms: tuple[tuple[float, float], ...]) -> None:
        pass

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def terms(self) -> tuple[tuple[float, float], ...]:
        """Canonical ``(coeff, power)`` pairs sorted by ascending power."""
        return self._terms

    @property
    def powers(self) -> tuple[float, ...]:
        return tuple(p for _, p in self._terms)

    @property
    def coeffs(self) -> tuple[float, ...]:
        return tuple(c for c, _ in self._terms)

    @property
    def min_power(self) -> float:
        return min(self.powers, default=0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FracExpr):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(self._terms)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self._terms)!r})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for c, p in self._terms:
            if p == 0.0:
                parts.append(f"{c:g}")
            elif p == 1.0:
                parts.append(f"{c:g}*x")
            else:
                parts.append(f"{c:g}*x^{p:g}")
        return " + ".join(parts).replace("+ -", "- ")

    # arithmetic ---------------------------------------------------------------

    def __add__(self, other: FracExpr | Number) -> FracExpr:
        if isinstance(other, (int, float)):
            other = FracPoly([(other, 0.0)])
        if not isinstance(other, FracExpr):
            return NotImplemented
        return _make(self._terms + other._terms)

    __radd__ = __add__

    def __neg__(self) -> FracExpr:
        return _make((-c, p) for c, p in self._terms)

    def __sub__(self, other: FracExpr | Number) -> FracExpr:
        return self + (-other)

    def __rsub__(self, other: FracExpr | Number) -> FracExpr:
        return (-self) + other

    def __mul__(self, other: FracExpr | Number) -> FracExpr:
        if isinstance(other, (int, float)):
            return _make((c * other, p) for c, p in self._terms)
        if not isinstance(other, FracExpr):
            return NotImplemented
        return _make(
            (c1 * c2, p1 + p2) for c1, p1 in self._terms for c2, p2 in other._terms
        )

    __rmul__ = __mul__

    # evaluation ---------------------------------------------------------------

    def __call__(self, x):
        return evaluate(self, x)

    def derivative(self, k: int = 1) -> FracExpr:
        return derivative(self, k)


class FracPoly(FracExpr):
    """A :class:`FracExpr` whose powers are all >= 0 (continuous on [0, 1])."""

    __slots__ = ()

    @classmethod
    def _check(cls, terms: tuple[tuple[float, float], ...]) -> None:
        for _, p in terms:
            if p < 0.0:
                raise ValueError(f"FracPoly powers must be >= 0, got {p:g}")

    def caputo(self, sigma: float) -> FracExpr:
        return caputo(self, sigma)


def _make(terms: Iterable[tuple[float, float]]) -> FracExpr:
    canon = _canonical(terms)
    cls = FracPoly if all(p >= 0.0 for _, p in canon) else FracExpr
    obj = cls.__new__(cls)
    object.__setattr__(obj, "_terms", canon)
    return obj


def monomial(power: Number, coeff: Number = 1.0) -> FracExpr:
    """``coeff * x**power`` as a one-term expression."""
    return _make([(coeff, power)])


def evaluate(p: FracExpr, x):
    """Evaluate ``p`` at a scalar or array ``x`` in [0, 1].

    ``x = 0`` is allowed only when every power is >= 0; a constant term
    contributes its coefficient there.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0):
        raise ValueError("fractional polynomials are only evaluated for x >= 0")
    if p.min_power < 0.0 and np.any(xa == 0.0):
        raise ValueError(
            f"cannot evaluate at x = 0: term with negative power {p.min_power:g}"
        )
    out = np.zeros_like(xa)
    for c, pw in p.terms:
        out = out + c * (np.ones_like(xa) if pw == 0.0 else xa**pw)
    if np.ndim(x) == 0:
        return float(out)
    return out


def _falling_factorial(p: float, k: int) -> float:
    acc = 1.0
    for i in range(k):
        acc *= p - i
    return acc


def derivative(p: FracExpr, k: int = 1) -> FracExpr:
    """k-fold classical derivative; integer-power terms of degree < k vanish."""
    if int(k) != k or k < 1:
        raise ValueError(f"derivative order must be a positive integer, got {k!r}")
    k = int(k)
    out = []
    for c, pw in p.terms:
        factor = _falling_factorial(pw, k)
        if factor != 0.0:
            out.append((c * factor, pw - k))
    return _make(out)


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not 1.0 < sigma < 2.0:
        raise ValueError(f"Caputo order must satisfy 1 < sigma < 2, got {sigma:g}")
    return sigma


def caputo(p: FracPoly, sigma: float) -> FracExpr:
    """Exact Caputo derivative of order ``1 < sigma < 2``.

    Terms ``x**0`` and ``x**1`` map to zero; ``x**p`` with ``p > 1`` maps to
    ``gamma(p + 1) / gamma(p + 1 - sigma) * x**(p - sigma)``. Powers in
    (0, 1) are rejected: such a term is not continuously differentiable at
    the origin and the Caputo derivative of order > 1 does not exist in the
    classical sense.
    """
    sigma = _check_sigma(sigma)
    out = []
    for c, pw in p.terms:
        if pw == 0.0 or pw == 1.0:
            continue
        if pw < 1.0:
            raise ValueError(
                f"Caputo derivative of order {sigma:g} undefined for power {pw:g}; "
                "allowed powers are 0, 1 and p > 1"
            )
        out.append((c * gamma(pw + 1.0) / gamma(pw + 1.0 - sigma), pw - sigma))
    return _make(out)


# quadrature oracle ------------------------------------------------------------

_JACOBI_CACHE: dict[tuple[int, float, float], tuple[np.ndarray, np.ndarray]] = {}


def _jacobi(n: int, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    key = (n, alpha, beta)
    if key not in _JACOBI_CACHE:
        _JACOBI_CACHE[key] = roots_jacobi(n, alpha, beta)
    return _JACOBI_CACHE[key]


def _kernel_integral(second: FracExpr, sigma: float, x: float, n: int) -> float:
    r"""Approximate :math:`\int_0^x (x - t)^{1 - \sigma} u''(t)\,dt` with n-point rules."""
    a = 1.0 - sigma
    half = 0.5 * x
    quarter = 0.25 * x

    # [x/2, x]: substitute t = x - s; Jacobi weight carries s**(1 - sigma)
    xi, w = _jacobi(n, 0.0, a)
    s = quarter * (1.0 + xi)
    right = quarter ** (1.0 + a) * float(np.dot(w, evaluate(second, x - s)))

    # [0, x/2]: term by term, Jacobi weight carries t**q; (x - t)**a is smooth
    left = 0.0
    for c, q in second.terms:
        if q <= -1.0:
            raise QuadratureError(f"integrand term x^{q:g} is not integrable at 0")
        xi, w = _jacobi(n, 0.0, q)
        t = quarter * (1.0 + xi)
        left += c * quarter ** (1.0 + q) * float(np.dot(w, (x - t) ** a))
    return left + right


def caputo_quadrature_oracle(
    p: FracPoly, sigma: float, x: float, *, tol: float = 1e-10
) -> float:
    r"""Caputo derivative at ``x`` by quadrature of the integral form.

    .. math::

        D_*^\sigma u(x) = \frac{1}{\Gamma(2 - \sigma)}
            \int_0^x (x - t)^{1 - \sigma} u''(t)\,dt

    The interval is split at ``x/2``. Gauss-Jacobi rules absorb the
    ``(x - t)**(1 - sigma)`` endpoint singularity on the right half and the
    ``t**q`` behaviour of each term of ``u''`` on the left half. The rule is
    doubled until two successive values agree to ``tol`` (relative to the
    integrand scale); failure raises :class:`QuadratureError`.

    Normalisation uses :func:`math.gamma` so the oracle shares no code with
    :func:`caputo`.
    """
    sigma = _check_sigma(sigma)
    x = float(x)
    if not 0.0 < x <= 1.0:
        raise ValueError(f"oracle evaluation point must lie in (0, 1], got {x:g}")
    second = derivative(p, 2)
    if len(second) == 0:
        return 0.0
    scale = sum(abs(c) for c, _ in second.terms)
    prev = _kernel_integral(second, sigma, x, 16)
    for n in (32, 64, 128):
        cur = _kernel_integral(second, sigma, x, n)
        if abs(cur - prev) <= tol * max(scale, abs(cur)):
            return cur / math.gamma(2.0 - sigma)
        prev = cur
    raise QuadratureError(
        f"quadrature oracle did not converge at x = {x:g}, sigma = {sigma:g}"
    )


def manufactured_rhs(
    u: FracPoly, b: FracPoly, c: FracPoly, delta: float
) -> Callable[[Any], Any]:
    """Right-hand side ``f = -D_*^delta u + b u' + c u`` for a prescribed solution."""
    cap = caputo(u, delta)
    du = derivative(u, 1)

    def f(x):
        return -evaluate(cap, x) + evaluate(b, x) * evaluate(du, x) + evaluate(c, x) * evaluate(u, x)

    f.caputo = cap  # type: ignore[attr-defined]
    return f


# JSON ---------------------------------------------------------------------------

_BINOPS: Mapping[type, Callable[[Any, Any], Any]] = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS: Mapping[type, Callable[[Any], Any]] = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def safe_eval(expr: str, names: Mapping[str, Any]) -> Any:
    """Evaluate an arithmetic expression over ``names`` (no attribute access, no builtins)."""

    def walk(node: ast.AST) -> Any:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ValueError(f"unknown name {node.id!r} in expression {expr!r}")
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](walk(node.operand))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and callable(names.get(node.func.id))
            and not node.keywords
        ):
            return names[node.func.id](*(walk(a) for a in node.args))
        raise ValueError(f"unsupported syntax in expression {expr!r}")

    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {expr!r}: {exc.msg}") from None
    return walk(tree)


def resolve_power(power: Number | str, delta: float | None) -> float:
    """A numeric power, or a string such as ``"delta"`` / ``"2*delta-1"``."""
    if isinstance(power, str):
        if delta is None:
            raise ValueError(f"power {power!r} refers to delta but no delta is given")
        return float(safe_eval(power, {"delta": float(delta)}))
    return float(power)


def fracpoly_from_json(data: list[Mapping[str, Any]], delta: float | None = None) -> FracPoly:
    """Build a :class:`FracPoly` from ``[{"coeff": c, "power": p}, ...]``."""
    if not isinstance(data, list):
        raise ValueError("a fractional polynomial must be a JSON array of terms")
    terms = []
    for item in data:
        try:
            coeff, power = item["coeff"], item["power"]
        except (KeyError, TypeError):
            raise ValueError(f"term {item!r} needs 'coeff' and 'power'") from None
        terms.append((float(coeff), resolve_power(power, delta)))
    out = _make(terms)
    if not isinstance(out, FracPoly):
        raise ValueError("fractional polynomial powers must be >= 0")
    return out


def fracpoly_to_json(p: FracExpr) -> list[dict[str, float]]:
    return [{"coeff": c, "power": pw} for c, pw in p.terms]
