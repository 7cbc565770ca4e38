import csv
import io
import json
import subprocess
import sys

import pytest

from caputo_bvp.cli import EXIT_CERTIFICATE, EXIT_INVALID, EXIT_IO, EXIT_OK, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    return list(csv.reader(io.StringIO(text)))


# solve ------------------------------------------------------------------------------


def test_solve_tp1_csv(capsys):
    code, out, err = run(capsys, "solve", "tp1", "--delta", "1.4", "--N", "64")
    assert code == EXIT_OK and err == ""
    rows = csv_rows(out)
    assert rows[0] == ["x", "u_numeric", "u_exact", "error"]
    assert len(rows) - 1 == 65
    assert max(float(r[3]) for r in rows[1:]) == pytest.approx(1.466e-1, rel=5e-3)


def test_solve_tp2_csv(capsys):
    code, out, _ = run(capsys, "solve", "tp2", "--delta", "1.3", "--N", "128")
    assert code == EXIT_OK
    rows = csv_rows(out)
    assert rows[0] == ["x", "u_numeric"]
    assert len(rows) - 1 == 129


def test_solve_rejects_small_alpha0(capsys):
    code, out, err = run(capsys, "solve", "tp1", "--delta", "1.4", "--alpha0", "0.1")
    assert code == EXIT_INVALID
    assert out == ""
    assert "alpha0 < 1/(delta-1)" in err


def test_solve_json_and_output_file(capsys, tmp_path):
    path = tmp_path / "sol.json"
    code, out, _ = run(capsys, "solve", "tp1", "--delta", "1.5", "--N", "32", "--format", "json",
                       "-o", str(path), "--solver", "forward")
    assert code == EXIT_OK and out == ""
    data = json.loads(path.read_text())
    assert data["N"] == 32 and len(data["x"]) == 33
    assert data["max_error"] == pytest.approx(max(data["error"]))
    assert data["solver"] in ("forward", "lu")


def test_solve_problem_file(capsys, tmp_path):
    data = {"delta": 1.6, "b": 0.0, "c": 1.0, "f": 1.0, "alpha0": 2.0, "alpha1": 0.0,
            "gamma0": 0.0, "gamma1": 0.0}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(data))
    code, out, _ = run(capsys, "solve", "--problem", str(path), "--N", "16")
    assert code == EXIT_OK
    assert len(csv_rows(out)) == 18
    code, _, err = run(capsys, "solve", str(path), "--alpha0", "1.0")
    assert code == EXIT_INVALID and "alpha0" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "missing.json", "--delta", "1.5"],
        ["solve", "tp1"],  # no delta
        ["solve", "tp1", "--delta", "1.5", "--N", "3"],
        ["bogus"],
        ["solve", "tp1", "--delta", "abc"],
        ["table1", "--Ns", "64,100"],
    ],
)
def test_io_and_usage_errors_exit_1(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_IO
    assert out == "" and err


def test_bad_json_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{oops")
    code, _, err = run(capsys, "solve", str(path), "--delta", "1.5")
    assert code == EXIT_IO and err


def test_delta_out_of_range_is_invalid(capsys):
    code, _, err = run(capsys, "solve", "tp1", "--delta", "2.5")
    assert code == EXIT_INVALID and "delta" in err


# tables and studies ----------------------------------------------------------------


def test_table1_two_columns(capsys):
    code, out, _ = run(capsys, "table1", "--Ns", "64,128", "--format", "csv")
    assert code == EXIT_OK
    rows = csv_rows(out)
    body = rows[1:]
    assert len(body) == 2 * 10
    for r in body:
        assert (r[3] != "") == (r[1] == "64")
    cell = next(r for r in body if r[0] == "1.5" and r[1] == "64")
    assert float(cell[2]) == pytest.approx(1.476e-1, rel=5e-3)
    assert float(cell[3]) == pytest.approx(0.971, abs=0.01)


def test_table1_layout(capsys):
    code, out, _ = run(capsys, "table1", "--Ns", "64,128", "--deltas", "1.1,1.9")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0].split() == ["delta", "N=64", "N=128"]
    assert len(lines) == 1 + 2 * 3
    assert lines[-2].split()[0] == "uniform"


def test_table2_spot_cells(capsys):
    code, out, _ = run(capsys, "table2", "--Ns", "64,128", "--deltas", "1.1,1.5", "--format", "json")
    assert code == EXIT_OK
    data = json.loads(out)
    cells = {(e["delta"], e["N"]): e for e in data["entries"]}
    assert cells[(1.1, 64)]["value"] == pytest.approx(2.304e-1, rel=1e-2)
    assert cells[(1.1, 64)]["order"] == pytest.approx(0.017, abs=0.01)
    assert cells[(1.5, 64)]["order"] == pytest.approx(0.844, abs=0.01)


def test_study_modes(capsys):
    code, out, _ = run(capsys, "study", "tp1", "--deltas", "1.3", "--Ns", "32,64")
    assert code == EXIT_OK
    assert csv_rows(out)[0][2] == "error"
    code, out, _ = run(capsys, "study", "tp2", "--delta", "1.3", "--Ns", "32,64", "--jobs", "2")
    assert code == EXIT_OK
    assert csv_rows(out)[0][2] == "difference"


# verify -------------------------------------------------------------------------------


@pytest.mark.parametrize("argv", [["tp1", "--delta", "1.2", "--N", "64"], ["tp2", "--delta", "1.9", "--N", "256"]])
def test_verify_passes(capsys, argv):
    code, out, _ = run(capsys, "verify", *argv)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["m_matrix"] is True
    assert report["rescaled_inverse_norm"] <= 1.0 + 1e-8


def test_verify_rejects_small_alpha0_before_certificate(capsys):
    code, out, err = run(capsys, "verify", "tp2", "--delta", "1.5", "--alpha0", "0.5")
    assert code == EXIT_INVALID
    assert out == "" and "alpha0" in err


def test_verify_reports_failed_certificate(capsys, monkeypatch):
    import caputo_bvp.cli as cli
    from caputo_bvp.monotone import CheckResult, MonotonicityReport

    failing = MonotonicityReport(
        {"eliminated_offdiagonal_nonpositive": CheckResult(False, (3, 1), 0.5)}, True, False, 1.0, {}
    )
    monkeypatch.setattr(cli, "certify_m_matrix", lambda *a, **k: failing)
    code, out, err = run(capsys, "verify", "tp1", "--delta", "1.5", "--N", "16")
    assert code == EXIT_CERTIFICATE
    assert json.loads(out)["m_matrix"] is False
    assert "eliminated_offdiagonal_nonpositive" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "caputo_bvp", "solve", "tp2", "--delta", "1.5", "--N", "8"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 10
