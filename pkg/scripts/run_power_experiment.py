"""Run the power study: rejection of H0: beta = 0 as the true beta moves.

Example (overidentified design, six strong clusters):

    python scripts/run_power_experiment.py --dz 2 --pi0 6 --rho 0.2 --strong 1,3,6 \
        --beta-grid -1.2,-0.6,-0.2,0,0.2,0.6,1.2 --reps 2000 --workers 2 --out power.csv
"""

import argparse
import sys

from wbiv.io import rejection_table_csv, write_results
from wbiv.simulate import DgpConfig, default_power_grid, run_power_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--q", type=int, default=10, choices=(10, 14))
    parser.add_argument("--dz", type=int, default=2)
    parser.add_argument("--pi0", type=float, default=6.0)
    parser.add_argument("--rho", default="0.2")
    parser.add_argument("--strong", default="1")
    parser.add_argument("--tests", default="WB-US:full,WB-S:full")
    parser.add_argument("--beta-grid", help="comma-separated true betas")
    parser.add_argument("--reps", type=int, default=2000)
    parser.add_argument("-B", "--boot-reps", type=int, default=499)
    parser.add_argument("--alpha", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    args = parser.parse_args()

    configs = [
        DgpConfig(q=args.q, d_z=args.dz, pi0=args.pi0, rho=float(r), strong_clusters=int(s))
        for r in args.rho.split(",")
        for s in args.strong.split(",")
    ]
    if args.beta_grid:
        grid = [float(v) for v in args.beta_grid.split(",")]
    else:
        grid = default_power_grid(args.pi0)
    table = run_power_experiment(
        configs, args.tests.split(","), beta_grid=grid, mc_reps=args.reps,
        boot_reps=args.boot_reps, seed=args.seed, workers=args.workers, alpha=args.alpha,
    )
    if args.out:
        write_results(table, args.out, format="csv")
    else:
        sys.stdout.write(rejection_table_csv(table))


if __name__ == "__main__":
    main()
