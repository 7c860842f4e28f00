"""Run every scenario file in a directory and print a one-line verdict per task.

Usage: python scripts/run_scenarios.py [dir]
"""

from __future__ import annotations

import sys
from pathlib import Path

from qinstrument.scenario import load_scenario, report_text, run_scenario


def main(argv: list[str]) -> int:
    root = Path(argv[1]) if len(argv) > 1 else Path(__file__).resolve().parents[1] / "scenarios"
    failed = 0
    for path in sorted(root.glob("*.json")):
        report = run_scenario(load_scenario(path))
        print(f"== {path.name}")
        print(report_text(report), end="")
        failed += not report["passed"]
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
