"""Noise-level and step-size study on the phillips test problem.

Runs every figure-style command on configs/phillips.json and prints the
minimal-error table. Full size (n = 1000, k_max = 1e5, 100 runs) takes
several minutes; use --runs / --k-max for a quick pass.
"""

import argparse
from pathlib import Path

from sgdreg import experiments as ex

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "phillips.json")
    ap.add_argument("--out", default="out/phillips")
    ap.add_argument("--runs", type=int)
    ap.add_argument("--k-max", type=int)
    args = ap.parse_args()
    cfg = ex.load_config(args.config, {"n_runs": args.runs, "k_max": args.k_max})
    out = Path(args.out)
    ex.cmd_sweep_alpha(cfg, out / "sweep_alpha")
    ex.cmd_compare_landweber(cfg, out / "landweber")
    ex.cmd_frequency_decay(cfg, out / "frequency")
    table = ex.cmd_min_error_table(cfg, out / "table")
    print(f"{'delta':>8} {'min error':>11} {'argmin k':>9} {'SE':>10}")
    for row in table["rows"]:
        print(f"{row['delta']:8.0e} {row['min_error']:11.3e} {row['argmin_k']:9d} {row['se_at_min']:10.2e}")
    print("trends:", table["trends"])


if __name__ == "__main__":
    main()
