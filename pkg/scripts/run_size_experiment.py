"""Run the null-size study over a grid of design cells.

Example (the just-identified headline grid, two workers):

    python scripts/run_size_experiment.py --dz 1 --pi0 2,4,6 --rho 0,0.5,0.9 \
        --tests WB-US:tsls,WB-S:tsls --reps 2000 --workers 2 --out size.csv
"""

import argparse
import sys

from wbiv.io import rejection_table_csv, write_results
from wbiv.simulate import DgpConfig, run_size_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--q", type=int, default=10, choices=(10, 14))
    parser.add_argument("--dz", type=int, default=1)
    parser.add_argument("--pi0", default="4")
    parser.add_argument("--rho", default="0,0.5,0.9")
    parser.add_argument("--strong", default="1")
    parser.add_argument("--tests", default="WB-US:tsls,WB-S:tsls")
    parser.add_argument("--reps", type=int, default=2000)
    parser.add_argument("-B", "--boot-reps", type=int, default=499)
    parser.add_argument("--alpha", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    args = parser.parse_args()

    configs = [
        DgpConfig(q=args.q, d_z=args.dz, pi0=float(p), rho=float(r), strong_clusters=int(s))
        for p in args.pi0.split(",")
        for r in args.rho.split(",")
        for s in args.strong.split(",")
    ]
    table = run_size_experiment(
        configs, args.tests.split(","), mc_reps=args.reps, boot_reps=args.boot_reps,
        seed=args.seed, workers=args.workers, alpha=args.alpha,
    )
    if args.out:
        write_results(table, args.out, format="csv")
    else:
        sys.stdout.write(rejection_table_csv(table))


if __name__ == "__main__":
    main()
