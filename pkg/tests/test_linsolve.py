import dataclasses
import io
import logging
import warnings

import numpy as np
import pytest

from caputo_bvp.discretize import LowerHessenbergMatrix, UniformMesh, assemble
from caputo_bvp.fracpoly import evaluate
from caputo_bvp.harness import max_error
from caputo_bvp.linsolve import (
    SOLVERS,
    DiscreteSolution,
    ResidualError,
    SingularMatrixError,
    residual_limit,
    solve,
    solve_forward,
    solve_hessenberg,
    solve_lu,
    write_solution_csv,
)
from caputo_bvp.model import FractionalBVP, test_problem_1, test_problem_2

GRID_DELTAS = [1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9]
GRID_NS = [64, 128, 256, 512, 1024, 2048]
ALL = sorted(SOLVERS)


@pytest.mark.parametrize("method", ALL)
def test_constant_solution(method):
    delta = 1.4
    p = FractionalBVP(delta, 0.0, 1.0, 1.0, 1.0 / (delta - 1.0), 1.0, 1.0, 1.0)
    sol = solve(assemble(p, 50), method)
    np.testing.assert_allclose(sol.values, 1.0, rtol=0, atol=1e-12)


@pytest.mark.parametrize("method", ALL)
@pytest.mark.parametrize("delta", [1.2, 1.8])
def test_linear_solution(method, delta):
    a0, a1 = 1.0 / (delta - 1.0), 0.7
    p = FractionalBVP(delta, 0.0, 0.0, 0.0, a0, a1, -a0, 1.0 + a1)
    sol = solve(assemble(p, 64), method)
    np.testing.assert_allclose(sol.values, sol.x, rtol=0, atol=1e-10)


@pytest.mark.parametrize("method", ALL)
def test_tp1_error_value(method):
    p = test_problem_1(1.5)
    sol = solve(assemble(p, 64), method)
    assert max_error(sol, p.exact) == pytest.approx(1.476e-1, rel=5e-3)


def test_solvers_agree_on_experiment_grid():
    worst = {"forward": 0.0, "hessenberg": 0.0}
    for builder in (test_problem_1, test_problem_2):
        for delta in GRID_DELTAS:
            for N in GRID_NS:
                sys_ = assemble(builder(delta), N)
                ref = solve_lu(sys_).values
                for name, fn in (("forward", solve_forward), ("hessenberg", solve_hessenberg)):
                    diff = np.max(np.abs(fn(sys_).values - ref))
                    worst[name] = max(worst[name], diff)
    assert worst["forward"] <= 1e-8
    assert worst["hessenberg"] <= 1e-8


def test_forward_tp2_example():
    sys_ = assemble(test_problem_2(1.5), 256)
    np.testing.assert_allclose(solve_forward(sys_).values, solve_lu(sys_).values, rtol=0, atol=1e-8)


def test_forward_falls_back_when_unstable(caplog):
    # the shooting recurrence grows like a power of N for delta near 1
    sys_ = assemble(test_problem_2(1.1), 1024)
    with caplog.at_level(logging.INFO, logger="caputo_bvp.linsolve"):
        sol = solve_forward(sys_)
    assert sol.solver == "lu"
    assert any("using LU" in r.getMessage() for r in caplog.records)


def test_forward_keeps_shooting_when_stable():
    sol = solve_forward(assemble(test_problem_2(1.9), 256))
    assert sol.solver == "forward"


@pytest.mark.parametrize("method", ALL)
@pytest.mark.parametrize("delta", [1.1, 1.5, 1.9])
def test_nonnegative_data_gives_nonnegative_solution(method, delta):
    p = test_problem_2(delta)
    assert p.gamma0 >= 0 and p.gamma1 >= 0
    sol = solve(assemble(p, 256), method)
    assert sol.values.min() >= -1e-10


@pytest.mark.parametrize("method", ALL)
def test_residual_recorded_and_bounded(method):
    sys_ = assemble(test_problem_1(1.7), 300)
    sol = solve(sys_, method)
    assert sol.residual == pytest.approx(np.max(np.abs(sys_.A @ sol.values - sys_.rhs)))
    assert sol.residual <= residual_limit(sys_, sol.values)
    assert residual_limit(sys_, sol.values) >= 1e-9 * (1.0 + np.max(np.abs(sys_.rhs)))


def singular_system():
    sys_ = assemble(test_problem_2(1.5), 8)
    a = np.array(sys_.A.dense())
    a[8, :] = 0.0
    return dataclasses.replace(sys_, A=LowerHessenbergMatrix(a))


@pytest.mark.parametrize("method", ["lu", "hessenberg"])
def test_singular_matrix_detected(method):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(SingularMatrixError):
            solve(singular_system(), method)


def test_forward_on_singular_matrix_raises():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises((SingularMatrixError, ResidualError)):
            solve_forward(singular_system())


def test_unknown_solver():
    with pytest.raises(ValueError, match="unknown solver"):
        solve(assemble(test_problem_2(1.5), 8), "cholesky")


def test_discrete_solution_checks():
    mesh = UniformMesh(4)
    with pytest.raises(ValueError):
        DiscreteSolution(mesh, np.zeros(4))
    with pytest.raises(ValueError):
        DiscreteSolution(mesh, np.array([0.0, 1.0, np.nan, 0.0, 0.0]))
    sol = solve_lu(assemble(test_problem_2(1.5), 4))
    with pytest.raises(ValueError):
        sol.values[0] = 1.0


def test_solution_csv_with_exact():
    p = test_problem_1(1.4)
    sol = solve_lu(assemble(p, 64))
    buf = io.StringIO()
    write_solution_csv(sol, buf, p.exact)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,u_numeric,u_exact,error"
    assert len(lines) == 66
    x, u, ue, err = (float(v) for v in lines[10].split(","))
    assert x == pytest.approx(9 / 64, rel=1e-5)
    assert ue == pytest.approx(evaluate(p.exact, 9 / 64), rel=1e-5)
    assert err == pytest.approx(abs(ue - u), rel=1e-4, abs=1e-9)
    assert lines[1].split(",")[0] == "0.00000E+00"


def test_solution_csv_without_exact():
    sol = solve_lu(assemble(test_problem_2(1.3), 128))
    buf = io.StringIO()
    write_solution_csv(sol, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,u_numeric"
    assert len(lines) == 130
