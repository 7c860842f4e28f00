"""Command-line driver.

Exit codes: 0 when everything passes, 1 when a task or property fails,
2 for unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import sys

from .errors import InstrumentError
from .linalg import Tolerances
from .scenario import load_scenario, report_json, report_text, run_scenario
from .selftest import selftest, selftest_json, selftest_text

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _dims(text: str) -> list[int]:
    try:
        dims = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return dims


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qinstrument", description="Finite-dimensional quantum instrument toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="load a scenario and check every object")
    v.add_argument("file")

    r = sub.add_parser("run", help="run a scenario's tasks and print a JSON report")
    r.add_argument("file")

    rep = sub.add_parser("report", help="run a scenario and print the report in a chosen format")
    rep.add_argument("file")
    rep.add_argument("--format", choices=("json", "text"), default="text")

    s = sub.add_parser("selftest", help="run the seeded property suite")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--dims", type=_dims, default=[2, 3])
    s.add_argument("--tol", type=float, default=None, help="override every tolerance")
    s.add_argument("--format", choices=("json", "text"), default="json")
    return p


def _load(path: str, err):
    try:
        return load_scenario(path)
    except OSError as e:
        print(f"error: cannot read {path}: {e.strerror}", file=err)
    except InstrumentError as e:
        print(f"error: {type(e).__name__}: {e}", file=err)
    return None


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK

    if args.command == "selftest":
        if args.trials < 1:
            print("error: --trials must be >= 1", file=err)
            return EXIT_INPUT
        try:
            tol = Tolerances() if args.tol is None else Tolerances.uniform(args.tol)
        except ValueError as e:
            print(f"error: {e}", file=err)
            return EXIT_INPUT
        rep = selftest(args.seed, args.trials, args.dims, tol)
        out.write(selftest_json(rep) if args.format == "json" else selftest_text(rep))
        return EXIT_OK if rep["passed"] else EXIT_FAIL

    scenario = _load(args.file, err)
    if scenario is None:
        return EXIT_INPUT
    if args.command == "validate":
        out.write(f"ok: {len(scenario.objects)} objects, {len(scenario.tasks)} tasks\n")
        return EXIT_OK
    try:
        rep = run_scenario(scenario)
    except InstrumentError as e:
        print(f"error: {type(e).__name__}: {e}", file=err)
        return EXIT_INPUT
    fmt = "json" if args.command == "run" else args.format
    out.write(report_json(rep) if fmt == "json" else report_text(rep))
    return EXIT_OK if rep["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
