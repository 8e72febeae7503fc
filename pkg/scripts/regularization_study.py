"""Error at the a-priori stopping index as the noise level shrinks.

Synthetic 16 x 16 problem (sigma_i = i^-2, p = 1), noise of prescribed
norm, k(delta) from the balancing rule. Writes a CSV with one row per delta.
"""

import argparse

import numpy as np

from sgdreg.analysis import run_ensemble
from sgdreg.io import write_columns_csv
from sgdreg.model import SourceConfig, add_scaled_noise, build_synthetic_problem
from sgdreg.solvers import StepSchedule, a_priori_stopping_index


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.3)
    ap.add_argument("--runs", type=int, default=400)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", default="regularization.csv")
    args = ap.parse_args()
    p = 1.0
    w = np.random.default_rng(0).standard_normal(16)
    prob = build_synthetic_problem(16, 16, {"kind": "polynomial", "beta": 2.0}, SourceConfig(p, w), seed=0)
    sched = StepSchedule.for_problem(prob, args.alpha)
    deltas = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    ks, errs, ses = [], [], []
    for d in deltas:
        k = a_priori_stopping_index(d, args.alpha, p=p)
        stats = run_ensemble(prob, add_scaled_noise(prob, d, seed=1), sched, max(1, k - 1), args.runs, args.seed,
                             grid=[k], chunk_size=args.runs)
        ks.append(k)
        errs.append(stats.mean_error_sq[-1])
        ses.append(stats.se_error_sq[-1])
        print(f"delta {d:7.0e}  k {k:7d}  E||x_k - x||^2 {errs[-1]:.3e} +- {ses[-1]:.1e}")
    write_columns_csv(args.out, {"delta": deltas, "k": np.array(ks, dtype=int), "mean_error_sq": errs,
                                 "se_error_sq": ses})


if __name__ == "__main__":
    main()
