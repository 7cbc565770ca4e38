"""Command-line interface.

Exit codes: 0 success, 1 input/output or usage error, 2 the problem fails
validation, 3 the monotonicity certificate fails. Results go to stdout (or
``--output``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import functools
import io
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from caputo_bvp.discretize import assemble
from caputo_bvp.fracpoly import evaluate
from caputo_bvp.harness import run_study
from caputo_bvp.linsolve import SOLVERS, ResidualError, SingularMatrixError, solve, write_solution_csv
from caputo_bvp.model import (
    BUILTIN,
    FractionalBVP,
    ValidationError,
    builtin_problem,
    load_problem,
    problem_from_dict,
)
from caputo_bvp.monotone import certify_m_matrix, eliminate_col0, rescaled_inverse_norm_bound

log = logging.getLogger("caputo_bvp")

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_CERTIFICATE = 3

DEFAULT_DELTAS = (1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9)
DEFAULT_NS = (64, 128, 256, 512, 1024, 2048)
STUDY_NS = (64, 128, 256, 512)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with the validation code
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="caputo-bvp", description="Caputo two-point boundary value problems.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, formats=("csv", "json"), default="csv") -> None:
        p.add_argument("--output", "-o", help="write results here instead of stdout")
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--solver", choices=sorted(SOLVERS), default="lu")

    def problem(p: argparse.ArgumentParser) -> None:
        p.add_argument("source", nargs="?", help=f"built-in name ({', '.join(BUILTIN)}) or JSON file")
        p.add_argument("--problem", help="problem JSON file")
        p.add_argument("--alpha0", type=float, help="override alpha0")
        p.add_argument("--alpha1", type=float, help="override alpha1")

    p = sub.add_parser("solve", help="solve one problem on one mesh")
    problem(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--N", type=int, default=64)
    common(p)

    p = sub.add_parser("study", help="convergence study over deltas and mesh sizes")
    problem(p)
    p.add_argument("--deltas", type=_float_list)
    p.add_argument("--delta", type=float)
    p.add_argument("--Ns", type=_int_list)
    p.add_argument("--mode", choices=("exact", "two_mesh"), help="default: exact if available")
    p.add_argument("--jobs", type=int, default=1)
    common(p, ("csv", "json", "table"))

    for name, text in (("table1", "errors of the manufactured-solution problem"),
                       ("table2", "two-mesh differences of the constant-coefficient problem")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--deltas", type=_float_list)
        p.add_argument("--Ns", type=_int_list)
        p.add_argument("--jobs", type=int, default=1)
        common(p, ("csv", "json", "table"), default="table")

    p = sub.add_parser("verify", help="check the M-matrix certificate of the discretisation")
    problem(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--output", "-o")
    p.add_argument("--format", choices=("json",), default="json")
    return parser


# problem sources ---------------------------------------------------------------


def _overrides(args) -> dict[str, float]:
    return {k: v for k in ("alpha0", "alpha1") if (v := getattr(args, k)) is not None}


def _problem_builder(args):
    """Return a picklable ``delta -> FractionalBVP`` and the delta stored in a file, if any."""
    if args.source and args.problem:
        raise UsageError("give the problem either positionally or with --problem, not both")
    src = args.problem or args.source
    if src is None:
        raise UsageError(f"{args.command} needs a problem (built-in name or JSON file)")
    ov = _overrides(args)
    if src.lower() in BUILTIN and not Path(src).exists():
        return functools.partial(builtin_problem, src.lower(), **ov), None
    # parse once to surface IO and JSON errors early
    load_problem(src)
    with open(src, encoding="utf-8") as fh:
        data = json.load(fh)
    data.update(ov)
    return functools.partial(problem_from_dict, data), data.get("delta")


def _resolve_delta(args, stored) -> float:
    delta = args.delta if args.delta is not None else stored
    if delta is None:
        raise UsageError("--delta is required for this problem")
    return float(delta)


# output ------------------------------------------------------------------------


def _emit(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _solution_json(sol, p: FractionalBVP) -> str:
    out = {"N": sol.N, "delta": p.delta, "solver": sol.solver, "residual": sol.residual,
           "x": sol.x.tolist(), "u_numeric": sol.values.tolist()}
    if p.exact is not None:
        ue = evaluate(p.exact, sol.x)
        err = np.abs(ue - sol.values)
        out.update(u_exact=ue.tolist(), error=err.tolist(), max_error=float(err.max()))
    return json.dumps(out) + "\n"


# commands ----------------------------------------------------------------------


def cmd_solve(args) -> int:
    builder, stored = _problem_builder(args)
    p = builder(_resolve_delta(args, stored))
    sol = solve(assemble(p, args.N), args.solver)
    if args.format == "json":
        text = _solution_json(sol, p)
    else:
        buf = io.StringIO()
        write_solution_csv(sol, buf, p.exact)
        text = buf.getvalue()
    _emit(args, text)
    return EXIT_OK


def _render_table(args, table) -> str:
    if args.format == "json":
        return table.to_json() + "\n"
    if args.format == "table":
        return table.to_layout()
    return table.to_csv()


def cmd_study(args) -> int:
    builder, stored = _problem_builder(args)
    deltas = args.deltas or ([args.delta] if args.delta is not None else None)
    if deltas is None:
        deltas = [_resolve_delta(args, stored)]
    Ns = args.Ns or list(STUDY_NS)
    mode = args.mode
    if mode is None:
        mode = "exact" if builder(deltas[0]).exact is not None else "two_mesh"
    table = run_study(builder, deltas, Ns, mode, args.solver, extend=False, jobs=args.jobs)
    _emit(args, _render_table(args, table))
    return EXIT_OK


def _cmd_table(args, name: str, mode: str) -> int:
    deltas = args.deltas or list(DEFAULT_DELTAS)
    # the full default table carries orders in its last column as well
    extend = args.Ns is None
    Ns = args.Ns or list(DEFAULT_NS)
    builder = functools.partial(builtin_problem, name)
    table = run_study(builder, deltas, Ns, mode, args.solver, extend=extend, jobs=args.jobs)
    _emit(args, _render_table(args, table))
    return EXIT_OK


def cmd_table1(args) -> int:
    return _cmd_table(args, "tp1", "exact")


def cmd_table2(args) -> int:
    return _cmd_table(args, "tp2", "two_mesh")


def cmd_verify(args) -> int:
    builder, stored = _problem_builder(args)
    p = builder(_resolve_delta(args, stored))
    sys_ = assemble(p, args.N)
    Ap = eliminate_col0(sys_.A)
    report = certify_m_matrix(Ap, sys_.A)
    out = report.to_dict()
    if report.m_matrix:
        out["rescaled_inverse_norm"] = rescaled_inverse_norm_bound(Ap, sys_)
    _emit(args, json.dumps(out) + "\n")
    if not report.m_matrix:
        failed = [k for k, r in report.sign_checks.items() if not r.passed]
        if not report.row_sum_positivity:
            failed.append("row_sum_positivity")
        print(f"certificate failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "study": cmd_study,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"invalid problem: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except (SingularMatrixError, ResidualError) as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
