"""Run every theory check (risk oracles, bounds, EM properties) and report.

    python scripts/verify_theory.py [--suite props|bounds|em|all]
"""

import argparse
import sys

from sarpu.verify import SUITES, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--suite", choices=list(SUITES) + ["all"], default="all")
    args = ap.parse_args()
    ok = True
    for suite in SUITES if args.suite == "all" else [args.suite]:
        for res in run_suite(suite):
            print(res.line())
            ok &= res.passed
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
