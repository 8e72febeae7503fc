"""Command-line runner: ``sgdreg <command> --config FILE --out DIR``.

Exit status: 0 when everything requested passed, 1 when a bound check
failed, 2 for configuration errors (including inadmissible step schedules).
"""

import argparse
import sys

from . import experiments as ex
from .bounds import THEOREM_KEYS

COMMANDS = {
    "sweep-alpha": ex.cmd_sweep_alpha,
    "compare-landweber": ex.cmd_compare_landweber,
    "frequency-decay": ex.cmd_frequency_decay,
    "min-error-table": ex.cmd_min_error_table,
    "verify-bounds": ex.cmd_verify_bounds,
    "generate-problem": ex.cmd_generate_problem,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgdreg", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON experiment config (defaults are used when omitted)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, help="base seed for the index streams")
    parser.add_argument("--runs", type=int, help="number of independent runs")
    parser.add_argument("--theorem", action="append",
                        help=f"restrict verify-bounds to these labels ({', '.join(THEOREM_KEYS)}); repeatable or comma separated")
    parser.add_argument("--format", action="append", choices=ex.FORMATS, dest="formats",
                        help="output formats (repeatable); default csv and json")
    return parser


def _theorems(values):
    if not values:
        return None
    out = []
    for v in values:
        out.extend(t.strip() for t in v.split(",") if t.strip())
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "n_runs": args.runs, "formats": args.formats}
    theorems = _theorems(args.theorem)
    try:
        if theorems is not None and any(t not in THEOREM_KEYS for t in theorems):
            raise ex.ConfigError(f"--theorem: unknown label(s) {theorems}; choose from {list(THEOREM_KEYS)}")
        if args.config:
            cfg = ex.load_config(args.config, overrides)
        else:
            cfg = ex.config_from_dict({k: v for k, v in overrides.items() if v is not None}, source="<defaults>")
        if args.command == "verify-bounds":
            summary, status = ex.cmd_verify_bounds(cfg, args.out, theorems)
            for label, row in summary["theorems"].items():
                print(f"{'PASS' if row['passed'] else 'FAIL'}  {label:5s}  {row['n_reports']} reports"
                      + (f"  failed {row['failed']}" if row["failed"] else ""))
            return status
        COMMANDS[args.command](cfg, args.out)
        print(f"{args.command}: wrote outputs to {args.out}")
        return 0
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
