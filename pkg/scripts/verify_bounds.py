"""Run the inequality suite and print one line per report.

Exit status 1 when any report fails.
"""

import argparse
import sys

from sgdreg.bounds import THEOREM_KEYS, run_bound_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("labels", nargs="*", help=f"subset of {', '.join(THEOREM_KEYS)}")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    suite = run_bound_suite(args.labels or None, seed=args.seed)
    failed = 0
    for label, reports in suite.items():
        for rep in reports:
            failed += not rep.passed
            print(f"[{label}] {rep.summary_line()}")
    print(f"{failed} failing report(s)")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
