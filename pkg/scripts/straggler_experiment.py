"""Completion time and error of the compressed coded scheme over many seeds.

    python scripts/straggler_experiment.py                      # GC, n=500, s=19, rho=20
    python scripts/straggler_experiment.py --scheme matdot --K 250 --rho 25 --seeds 20
    python scripts/straggler_experiment.py --trace aws.csv --seeds 10

Each seed draws a fresh instance, sample and (unless --trace is given)
synthetic shifted-exponential trace.  Prints the spread of the time ratio
(compressed / exact) and of the relative error, and writes per-seed rows.
MatDot needs K <= (n + 1) / 2 for its exact baseline, and its real-valued
decode is only accurate while K / rho stays around 12 or below.
"""

import argparse
import csv
import sys

import numpy as np

from wcmm import experiments as ex


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--full-scale", action="store_true")
    p.add_argument("--scheme", choices=["gc", "matdot"])
    p.add_argument("--K", type=int, help="number of blocks (must divide N)")
    p.add_argument("--rho", type=int)
    p.add_argument("--trace")
    p.add_argument("--seeds", type=int, default=40)
    p.add_argument("--out", help="CSV destination (default: stdout)")
    args = p.parse_args(argv)

    base = ex.STRAGGLER_FULL if args.full_scale else ex.STRAGGLER_DESK
    base = base.replace(scheme=args.scheme, K=args.K, rho=args.rho, trace=args.trace)
    rows = []
    for seed in range(args.seeds):
        exact, comp = ex.run_straggler_experiment(base.replace(seed=seed))
        rows.append(
            {
                "seed": seed,
                "threshold": comp["recovery_threshold"],
                "exact_time": exact["completion_time"],
                "compressed_time": comp["completion_time"],
                "time_ratio": comp["speedup"],
                "rel_error": comp["rel_error"],
            }
        )

    ratio = np.array([r["time_ratio"] for r in rows])
    err = np.array([r["rel_error"] for r in rows])
    print(
        f"{base.scheme} n={base.n} rho={base.rho}: threshold {rows[0]['threshold']}, "
        f"time ratio median {np.median(ratio):.3f} [{ratio.min():.3f}, {ratio.max():.3f}], "
        f"rel error median {np.median(err):.2e} [{err.min():.2e}, {err.max():.2e}]",
        file=sys.stderr,
    )
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
