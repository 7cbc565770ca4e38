from __future__ import annotations

import pytest

from caputo_bvp.harness import run_study
from caputo_bvp.model import test_problem_1, test_problem_2

from reference_values import DELTAS, NS

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class AcceptanceRecorder:
    def __call__(self, number: int, title: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE[number] = (title, bool(passed), detail)


@pytest.fixture(scope="session")
def record_acceptance() -> AcceptanceRecorder:
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def table_tp1():
    """Full error table with orders in every column (solves up to N = 4096)."""
    return run_study(test_problem_1, DELTAS, NS, "exact", "lu", extend=True)


@pytest.fixture(scope="session")
def table_tp2():
    """Full two-mesh table with orders in every column (solves up to N = 8192)."""
    return run_study(test_problem_2, DELTAS, NS, "two_mesh", "lu", extend=True)
