import csv
import io
import json
import math

import numpy as np
import pytest

from caputo_bvp.discretize import assemble
from caputo_bvp.fracpoly import FracPoly
from caputo_bvp.harness import (
    Cell,
    ConvergenceTable,
    check_doubling,
    loglog_slope,
    max_error,
    order,
    run_study,
    truncation_profile,
    two_mesh_difference,
)
from caputo_bvp.linsolve import solve_lu
from caputo_bvp.model import FractionalBVP, test_problem_1, test_problem_2

from reference_values import DELTAS, NS


def linear_problem(delta=1.5):
    a0, a1 = 1.0 / (delta - 1.0), 0.5
    u = FracPoly([(0.3, 0.0), (-1.2, 1.0)])
    return FractionalBVP(delta, 0.0, 0.0, 0.0, a0, a1, 0.3 + 1.2 * a0, 0.3 - 1.2 - 0.6, u)


# order and error primitives -----------------------------------------------------


def test_order_examples():
    assert order(0.4, 0.2) == 1.0
    assert order(1.464e-1, 7.547e-2) == pytest.approx(0.956, abs=5e-3)
    assert order(math.e, math.e) == 0.0


@pytest.mark.parametrize("pair", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (float("nan"), 1.0)])
def test_order_domain(pair):
    with pytest.raises(ValueError):
        order(*pair)


def test_max_error_zero_for_exact_values():
    p = linear_problem()
    sol = solve_lu(assemble(p, 32))
    assert max_error(sol, p.exact) <= 1e-10


@pytest.mark.parametrize("delta, N, expected", [(1.1, 64, 1.464e-1), (1.9, 2048, 4.405e-3)])
def test_max_error_published_cells(delta, N, expected):
    p = test_problem_1(delta)
    assert max_error(solve_lu(assemble(p, N)), p.exact) == pytest.approx(expected, rel=5e-3)


def test_max_error_needs_exact():
    sol = solve_lu(assemble(test_problem_2(1.5), 8))
    with pytest.raises(ValueError):
        max_error(sol, None)


def test_two_mesh_difference_linear_problem():
    assert two_mesh_difference(linear_problem(1.3), 64) <= 1e-9


@pytest.mark.parametrize("delta, expected", [(1.5, 2.271e-2), (1.1, 2.304e-1)])
def test_two_mesh_difference_published_cells(delta, expected):
    assert two_mesh_difference(test_problem_2(delta), 64) == pytest.approx(expected, rel=1e-2)


# study driver -------------------------------------------------------------------


def test_check_doubling():
    assert check_doubling([64, 128]) == [64, 128]
    for bad in ([], [2, 4], [64, 100], [128, 64]):
        with pytest.raises(ValueError):
            check_doubling(bad)


def test_single_cell_has_no_order():
    t = run_study(test_problem_1, [1.5], [64])
    assert t.order(1.5, 64) is None
    assert t.value(1.5, 64) == pytest.approx(1.476e-1, rel=5e-3)
    assert t.uniform[64] == Cell(t.value(1.5, 64), None)


def test_orders_only_where_next_size_exists():
    t = run_study(test_problem_1, [1.3, 1.7], [64, 128])
    assert t.order(1.3, 64) == pytest.approx(order(t.value(1.3, 64), t.value(1.3, 128)))
    assert t.order(1.7, 128) is None
    assert t.uniform[64].value == max(t.value(1.3, 64), t.value(1.7, 64))
    assert not t.extra


def test_extend_adds_last_order():
    t = run_study(test_problem_1, [1.5], [64, 128], extend=True)
    assert t.order(1.5, 128) == pytest.approx(0.981, abs=0.01)
    assert set(t.extra) == {(1.5, 256)}


def test_two_mesh_study():
    t = run_study(test_problem_2, [1.5], [64, 128], "two_mesh")
    assert t.value(1.5, 64) == pytest.approx(2.271e-2, rel=1e-2)
    assert t.order(1.5, 64) == pytest.approx(0.844, abs=0.01)
    assert t.order(1.5, 128) is None


def test_study_argument_errors():
    with pytest.raises(ValueError):
        run_study(test_problem_1, [1.5], [64], mode="richardson")
    with pytest.raises(ValueError):
        run_study(test_problem_1, [], [64])
    with pytest.raises(ValueError, match="exact solution"):
        run_study(test_problem_2, [1.5], [64], mode="exact")


def test_parallel_study_is_deterministic():
    args = (test_problem_2, [1.2, 1.5, 1.8], [32, 64], "two_mesh")
    serial = run_study(*args, jobs=1)
    parallel = run_study(*args, jobs=2)
    assert serial.to_dict() == parallel.to_dict()


# writers ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_table():
    return run_study(test_problem_1, [1.2, 1.8], [64, 128])


def test_csv_writer(small_table):
    rows = list(csv.reader(io.StringIO(small_table.to_csv())))
    assert rows[0] == ["delta", "N", "error", "order"]
    assert len(rows) == 1 + 4 + 2
    assert rows[1][:2] == ["1.2", "64"]
    assert float(rows[1][2]) == pytest.approx(small_table.value(1.2, 64), rel=1e-5)
    assert rows[1][2].count("E") == 1 and len(rows[1][2].split("E")[0].replace(".", "")) == 6
    assert rows[2][3] == ""
    assert rows[-2][0] == "uniform" and rows[-1][3] == ""


def test_json_writer(small_table):
    data = json.loads(small_table.to_json())
    assert data["mode"] == "exact" and data["Ns"] == [64, 128]
    cell = next(e for e in data["entries"] if e["delta"] == 1.8 and e["N"] == 64)
    assert cell["value"] == small_table.value(1.8, 64)
    assert data["uniform"][1]["order"] is None


def test_layout_writer(small_table):
    lines = small_table.to_layout().splitlines()
    assert len(lines) == 1 + 2 * 3
    assert lines[0].split() == ["delta", "N=64", "N=128"]
    assert lines[1].split()[:2] == ["1.2", "e_N"]
    assert lines[2].split()[0] == "p_N" and len(lines[2].split()) == 2
    assert lines[-2].split()[0] == "uniform"


def test_two_mesh_labels():
    t = ConvergenceTable("two_mesh", (1.5,), (64,), {(1.5, 64): Cell(0.1)}, {64: Cell(0.1)})
    assert t.label == "difference"
    assert "d_N" in t.to_layout() and "q_N" in t.to_layout()
    assert t.to_csv().splitlines()[0] == "delta,N,difference,order"


# full tables ----------------------------------------------------------------------


@pytest.mark.slow
def test_tp1_uniform_and_orders(table_tp1):
    assert table_tp1.uniform[64].value == pytest.approx(1.479e-1, rel=5e-3)
    for d in DELTAS:
        for n in NS[2:]:
            assert 0.94 <= table_tp1.order(d, n) <= 1.01, (d, n)


@pytest.mark.slow
def test_tp2_degradation_near_one(table_tp2):
    assert table_tp2.order(1.1, 64) == pytest.approx(0.017, abs=0.01)
    assert table_tp2.order(1.1, 64) < 0.1
    assert table_tp2.order(1.5, 64) > 0.8
    assert table_tp2.uniform[64].value == pytest.approx(2.304e-1, rel=1e-2)


# truncation error ------------------------------------------------------------------


def test_truncation_zero_for_linear_solution():
    tau = truncation_profile(linear_problem(1.7), 128)
    assert np.max(np.abs(tau)) <= 1e-10
    with pytest.raises(ValueError):
        tau[0] = 1.0


def test_truncation_needs_exact():
    with pytest.raises(ValueError):
        truncation_profile(test_problem_2(1.5), 16)


def singular_problem(delta):
    """Pure Caputo problem whose solution is ``x^delta``; ``b = c = 0``."""
    u = FracPoly([(1.0, delta)])
    return FractionalBVP(
        delta, 0.0, 0.0, -math.gamma(delta + 1.0), 1.0 / (delta - 1.0), 1.0, 0.0, 1.0 + delta, u
    )


@pytest.mark.parametrize("delta", [1.3, 1.5, 1.7])
def test_truncation_shape_of_singular_component(delta):
    N = 512
    tau = truncation_profile(singular_problem(delta), N)
    j = np.arange(16, 257)
    assert loglog_slope(j - 1.0, tau[j]) == pytest.approx(1.0 - delta, abs=0.15)
    t0 = [abs(truncation_profile(singular_problem(delta), n)[0]) for n in (64, 128, 256)]
    for a, b in zip(t0, t0[1:]):
        assert order(a, b) == pytest.approx(delta - 1.0, abs=0.1)


@pytest.mark.parametrize("delta", [1.3, 1.5, 1.7])
def test_truncation_bound_stays_bounded_for_tp1(delta):
    r"""``max_j |tau_j| / (j-1)^{1-delta}`` does not grow under refinement."""
    ratios = []
    for N in (128, 256, 512):
        tau = truncation_profile(test_problem_1(delta), N)
        j = np.arange(2, N)
        ratios.append(np.max(np.abs(tau[j]) / (j - 1.0) ** (1.0 - delta)))
    assert ratios[-1] <= 1.1 * ratios[0]


def test_loglog_slope():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert loglog_slope(x, 3.0 * x**-0.4) == pytest.approx(-0.4)
    with pytest.raises(ValueError):
        loglog_slope(x, np.zeros(4))
    with pytest.raises(ValueError):
        loglog_slope(x[:1], x[:1])
