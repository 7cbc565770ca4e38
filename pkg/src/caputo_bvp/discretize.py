r"""Finite difference discretisation on the uniform mesh ``x_j = j/N``.

Interior rows ``j = 1..N-1`` discretise

.. math::

    -D_*^\delta u(x_j) \approx -\frac{1}{\kappa}
        \sum_{k=0}^{j-1} d_{j-k} (u_{k+2} - 2u_{k+1} + u_k),
    \qquad d_r = r_+^{2-\delta} - (r-1)_+^{2-\delta},

with :math:`\kappa = \Gamma(3-\delta) h^\delta`, plus an upwinded
convection term and the reaction term. The boundary rows approximate
``u'(0)`` and ``u'(1)`` by one-sided differences. The resulting matrix is
lower Hessenberg: row ``j`` has nonzeros only in columns ``0..j+1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO

import numpy as np

from caputo_bvp.model import FractionalBVP, ValidationError, sample, validate
from caputo_bvp.specfun import gamma

__all__ = [
    "MIN_N",
    "UniformMesh",
    "LowerHessenbergMatrix",
    "AssembledSystem",
    "kappa",
    "weight",
    "weights",
    "upwind_coeffs",
    "caputo_row",
    "assemble",
    "write_matrix_csv",
]

MIN_N = 4


@dataclass(frozen=True)
class UniformMesh:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < MIN_N:
            raise ValueError(f"mesh needs an integer N >= {MIN_N}, got {self.N!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N


class LowerHessenbergMatrix:
    """Square matrix of order N+1 that is zero above the first superdiagonal.

    Stored densely; the constructor rejects nonzeros outside the structure.
    Instances are read-only.
    """

    __slots__ = ("_a",)

    def __init__(self, a: np.ndarray, *, copy: bool = True):
        a = np.array(a, dtype=float) if copy else np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        for j in range(a.shape[0] - 2):
            tail = a[j, j + 2 :]
            if tail.any():
                k = j + 2 + int(np.flatnonzero(tail)[0])
                raise ValueError(f"entry ({j}, {k}) lies above the first superdiagonal")
        a.flags.writeable = False
        self._a = a

    @property
    def order(self) -> int:
        return self._a.shape[0]

    @property
    def N(self) -> int:
        return self._a.shape[0] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    def dense(self) -> np.ndarray:
        """Read-only view of the full array."""
        return self._a

    def row(self, j: int) -> np.ndarray:
        """Structural part of row ``j``: columns ``0..min(j+1, N)``."""
        return self._a[j, : min(j + 2, self.order)]

    def __getitem__(self, idx):
        return self._a[idx]

    def __matmul__(self, v):
        return self._a @ v

    def row_sums(self) -> np.ndarray:
        return self._a.sum(axis=1)

    def norm_inf(self) -> float:
        return max(float(np.abs(self.row(j)).sum()) for j in range(self.order))

    def triplets(self):
        """Yield ``(j, k, a_jk)`` over the structural entries that are nonzero."""
        for j in range(self.order):
            r = self.row(j)
            for k in np.flatnonzero(r):
                yield j, int(k), float(r[k])


@dataclass(frozen=True)
class AssembledSystem:
    """``A u = rhs`` for one problem on one mesh."""

    A: LowerHessenbergMatrix
    rhs: np.ndarray
    kappa: float
    problem: FractionalBVP
    mesh: UniformMesh
    weights: np.ndarray
    norm_A: float

    @property
    def N(self) -> int:
        return self.mesh.N


def kappa(delta: float, h: float) -> float:
    """Normalising factor of the discrete Caputo operator, ``gamma(3 - delta) h**delta``."""
    return gamma(3.0 - delta) * h**delta


def weight(r: int, delta: float) -> float:
    """``d_r = r_+**(2 - delta) - (r - 1)_+**(2 - delta)``; zero for ``r <= 0``."""
    if r <= 0:
        return 0.0
    if r == 1:
        return 1.0
    a = 2.0 - delta
    # r**a * (1 - (1 - 1/r)**a), free of cancellation for large r
    return -(r**a) * math.expm1(a * math.log1p(-1.0 / r))


def weights(n: int, delta: float) -> np.ndarray:
    """Array ``[d_0, d_1, ..., d_n]``."""
    a = 2.0 - delta
    d = np.zeros(n + 1)
    if n >= 1:
        d[1] = 1.0
    if n >= 2:
        r = np.arange(2, n + 1, dtype=float)
        d[2:] = -(r**a) * np.expm1(a * np.log1p(-1.0 / r))
    return d


def upwind_coeffs(b_j: float, h: float) -> tuple[float, float, float]:
    """Coefficients of ``u_{j-1}, u_j, u_{j+1}`` in the upwinded ``b_j u'(x_j)``.

    Backward difference when ``b_j >= 0``, forward difference otherwise.
    """
    if h <= 0.0:
        raise ValueError("mesh width must be positive")
    ab = abs(b_j)
    return -(b_j + ab) / (2.0 * h), ab / h, (b_j - ab) / (2.0 * h)


def _second_differences(d: np.ndarray) -> np.ndarray:
    """``s[m + 1] = -d_m + 2 d_{m+1} - d_{m+2}`` for ``m = -1 .. len(d) - 3``."""
    dp = np.concatenate(([0.0], d, [0.0, 0.0]))  # dp[i] = d_{i-1}
    return -dp[:-2] + 2.0 * dp[1:-1] - dp[2:]


def caputo_row(
    j: int, delta: float, N: int, d: np.ndarray | None = None, *, _s: np.ndarray | None = None
) -> np.ndarray:
    """Coefficients over columns ``0..j+1`` of the discrete ``-D_*^delta u(x_j)``.

    Column 0 carries ``-d_j``, column 1 ``2 d_j - d_{j-1}`` and column
    ``k >= 2`` the second difference ``-d_{j-k} + 2 d_{j-k+1} - d_{j-k+2}``,
    all divided by ``kappa``. ``d`` may pass precomputed weights.
    """
    if not 1 <= j <= N - 1:
        raise ValueError(f"interior row index must lie in 1..{N - 1}, got {j}")
    if d is None:
        d = weights(N + 1, delta)
    s = _second_differences(d) if _s is None else _s
    k = kappa(delta, 1.0 / N)
    out = np.empty(j + 2)
    out[0] = -d[j]
    out[1] = 2.0 * d[j] - d[j - 1]
    # column c = 2..j+1 has m = j - c running j-2 .. -1, i.e. s index j-1 .. 0
    out[2:] = s[j - 1 :: -1][:j]
    return out / k


def assemble(p: FractionalBVP, N: int, *, check: bool = True) -> AssembledSystem:
    """Assemble the full system for ``p`` on the uniform mesh with ``N`` intervals.

    Raises
    ------
    ValidationError
        If ``check`` is set and ``p`` fails :func:`~caputo_bvp.model.validate`.
    """
    mesh = UniformMesh(N)
    if check:
        report = validate(p)
        if not report.ok:
            raise ValidationError(report)
    delta = p.delta
    h = mesh.h
    x = mesh.nodes
    d = weights(N + 1, delta)
    s = _second_differences(d)
    bj = sample(p.b, x)
    cj = sample(p.c, x)

    a = np.zeros((N + 1, N + 1))
    a[0, 0] = 1.0 + p.alpha0 / h
    a[0, 1] = -p.alpha0 / h
    a[N, N - 1] = -p.alpha1 / h
    a[N, N] = 1.0 + p.alpha1 / h
    for j in range(1, N):
        row = caputo_row(j, delta, N, d, _s=s)
        lo, mid, up = upwind_coeffs(bj[j], h)
        row[j - 1] += lo
        row[j] += mid + cj[j]
        row[j + 1] += up
        a[j, : j + 2] = row

    rhs = np.empty(N + 1)
    rhs[0] = p.gamma0
    rhs[1:N] = sample(p.f, x[1:N])
    rhs[N] = p.gamma1
    rhs.flags.writeable = False
    A = LowerHessenbergMatrix(a, copy=False)
    return AssembledSystem(
        A=A, rhs=rhs, kappa=kappa(delta, h), problem=p, mesh=mesh,
        weights=d, norm_A=A.norm_inf(),
    )


def write_matrix_csv(A: LowerHessenbergMatrix, fh: IO[str]) -> None:
    """Dump the nonzero structural entries as ``j,k,a_jk`` rows."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["j", "k", "a_jk"])
    for j, k, v in A.triplets():
        w.writerow([j, k, repr(v)])
