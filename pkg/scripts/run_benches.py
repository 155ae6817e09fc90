#!/usr/bin/env python3
"""Desk-scale selection benchmark: Models I-III, all three kernels.

Prints one UF/CF/OF/MS row per (model, method) cell, mirroring the layout
of the CLI `bench` command.  Full-scale settings (p in the hundreds or
thousands) also run, they just take longer.

Example:
    python scripts/run_benches.py --reps 100 --p 10 --rho 0.0 --seed 101
"""

from __future__ import annotations

import argparse
import sys

from tracepursuit import SimDesign, run_experiment
from tracepursuit.kernels import Method


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--p", type=int, default=10)
    ap.add_argument("--rho", type=float, default=0.0)
    ap.add_argument("--dist", default="normal",
                    choices=["normal", "uniform12", "exponential1", "geometric_half"])
    ap.add_argument("--algorithm", default="htp", choices=["htp", "stp", "ftp"])
    ap.add_argument("--seed", type=int, default=101)
    args = ap.parse_args()

    print(f"n={args.n} p={args.p} rho={args.rho} dist={args.dist} "
          f"algorithm={args.algorithm} N={args.reps}")
    print(f"{'model':>6s} {'method':>7s} {'UF':>5s} {'CF':>5s} {'OF':>5s} "
          f"{'MS':>7s} {'fail':>5s} {'sec':>7s}")
    for model in ("I", "II", "III"):
        for method in Method:
            design = SimDesign(
                model=model, n=args.n, p=args.p, rho=args.rho,
                predictor_dist=args.dist, seed=args.seed,
            )
            res = run_experiment(design, args.algorithm, method, n_reps=args.reps)
            m = res.metrics
            print(f"{model:>6s} {method.value:>7s} {m.uf:5d} {m.cf:5d} {m.of_:5d} "
                  f"{m.ms:7.2f} {res.failures:5d} {res.elapsed_seconds:7.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
