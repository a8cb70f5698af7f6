"""Squared error of optimal vs uniform block sampling as compression grows.

    python scripts/variance_experiment.py                 # desk scale, seconds
    python scripts/variance_experiment.py --full-scale    # L=260, N=9600, M=280, K=480
    python scripts/variance_experiment.py --exponents 0 1 2 3 --out var.csv

One CSV row per (exponent, rho).  Exponent 0 is the near-uniform control,
where both samplers should be close.
"""

import argparse
import csv
import sys

from wcmm import experiments as ex


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--full-scale", action="store_true")
    p.add_argument("--exponents", type=float, nargs="+", default=[0.0, 2.0])
    p.add_argument("--rhos", type=int, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV destination (default: stdout)")
    args = p.parse_args(argv)

    base = ex.VARIANCE_FULL if args.full_scale else ex.VARIANCE_DESK
    base = base.replace(rhos=tuple(args.rhos) if args.rhos else None, trials=args.trials, seed=args.seed)
    rows = []
    for gamma in args.exponents:
        for row in ex.run_variance_experiment(base.replace(exponent=gamma)):
            rows.append({"exponent": gamma, **row})
            ratio = row["mean_err_weighted"] / row["mean_err_uniform"]
            print(f"exponent={gamma:<4} rho={row['rho']:<3} weighted/uniform error = {ratio:.3g}", file=sys.stderr)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(out, fieldnames=["exponent", *ex.VARIANCE_COLUMNS], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
