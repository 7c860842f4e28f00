"""Run the seeded property suite and print the worst residual per property.

Usage: python scripts/run_selftest.py [--seed N] [--trials T] [--dims 2,3]
"""

from __future__ import annotations

import argparse
import sys
import time

from qinstrument.selftest import selftest, selftest_text


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--dims", default="2,3")
    args = p.parse_args()
    dims = [int(d) for d in args.dims.split(",")]
    start = time.perf_counter()
    report = selftest(args.seed, args.trials, dims)
    print(selftest_text(report), end="")
    print(f"elapsed {time.perf_counter() - start:.1f} s", file=sys.stderr)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
