"""Command-line entry point: ``wcmm <subcommand> ...``.

On failure every subcommand exits with status 2 and writes a JSON object
``{"error": <type>, "message": <text>}`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .matrix import frobenius_norm, load_csv, load_matrix, matmul, partition, save_csv, save_matrix
from .sampling import (
    build_unweighted_sketch,
    build_weighted_sketch,
    compute_distribution,
    draw_fixed,
    draw_until_distinct,
    estimate_product,
)
from .sim import load_trace, simulate, synth_trace


def _read(path: str) -> np.ndarray:
    return load_csv(path) if path.endswith(".csv") else load_matrix(path)


def _write(path: str, M: np.ndarray) -> None:
    save_csv(path, M) if path.endswith(".csv") else save_matrix(path, M)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _config(args, default: ex.ExperimentConfig) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.from_json(args.config) if args.config else default
    overrides = {
        name: getattr(args, name, None)
        for name in ("L", "N", "M", "K", "trials", "seed", "exponent", "scheme", "n", "s", "rho",
                     "trace", "shift", "rate", "output")
    }
    if getattr(args, "rhos", None):
        overrides["rhos"] = tuple(args.rhos)
    return cfg.replace(**overrides).validate()


def _add_config_flags(p: argparse.ArgumentParser, straggler: bool) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--full-scale", action="store_true", help="use the larger instance sizes")
    for name in ("L", "N", "M", "K", "trials", "seed"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--exponent", type=float, help="power-law exponent of the block scales")
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    if straggler:
        p.add_argument("--scheme", choices=["gc", "matdot"])
        p.add_argument("--n", type=int, help="worker count")
        p.add_argument("--s", type=int, help="stragglers tolerated by the exact scheme")
        p.add_argument("--rho", type=int, help="compression factor")
        p.add_argument("--trace", help="CSV of worker durations (default: synthetic)")
        p.add_argument("--shift", type=float)
        p.add_argument("--rate", type=float)
    else:
        p.add_argument("--rhos", type=int, nargs="+", help="compression factors to sweep")


def cmd_gen(args) -> None:
    cfg = _config(args, ex.ExperimentConfig())
    inst = ex.gen_instance(cfg)
    _write(args.out_a, inst.A)
    _write(args.out_b, inst.B)
    _emit(json.dumps(inst.summary()), None)


def cmd_sketch(args) -> None:
    A, B = _read(args.a), _read(args.b)
    partA, partB = partition(A, B, args.K)
    dist = compute_distribution(partA, partB)
    if args.rule == "fixed":
        plan = draw_fixed(dist, args.t, args.seed)
    else:
        plan = draw_until_distinct(dist, args.t, args.seed)
    build = build_unweighted_sketch if args.unweighted else build_weighted_sketch
    sketch = build(partA, partB, plan)
    Y = estimate_product(sketch)
    if args.out:
        _write(args.out, Y)
    if args.plan_out:
        Path(args.plan_out).write_text(plan.to_json())
    exact = matmul(A, B)
    summary = {
        "kind": sketch.kind,
        "rule": plan.rule,
        "t": plan.t,
        "n_draws": plan.n_draws,
        "sketch_columns": int(sketch.C.shape[1]),
        "storage_reduction": plan.storage_reduction,
        "rel_error": frobenius_norm(exact - Y) ** 2
        / (frobenius_norm(A) * frobenius_norm(B)) ** 2,
    }
    _emit(json.dumps(summary), None)


def cmd_variance(args) -> None:
    cfg = _config(args, ex.VARIANCE_FULL if args.full_scale else ex.VARIANCE_DESK)
    rows = ex.run_variance_experiment(cfg)
    _emit(ex.rows_to_csv(rows, ex.VARIANCE_COLUMNS), cfg.output)


def cmd_straggler(args) -> None:
    cfg = _config(args, ex.STRAGGLER_FULL if args.full_scale else ex.STRAGGLER_DESK)
    rows = ex.run_straggler_experiment(cfg)
    text = json.dumps({"config": cfg.to_dict(), "rows": rows}, indent=2)
    _emit(text, cfg.output)


def cmd_simulate(args) -> None:
    cfg = _config(args, ex.STRAGGLER_FULL if args.full_scale else ex.STRAGGLER_DESK)
    inst = ex.gen_instance(cfg, ex.child_seeds(cfg.seed, 1)[0])
    trace = ex._trace_for(cfg)
    base, comp = ex.build_schemes(cfg)
    outcome = ex.run_single(cfg, comp, trace, inst)
    if args.with_baseline:
        outcome.baseline_time = ex.run_single(cfg, base, trace, inst).completion_time
    _emit(outcome.to_json(), cfg.output)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wcmm", description="Weighted CR coded matrix multiplication")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random instance (A, B)")
    _add_config_flags(p, straggler=False)
    p.add_argument("--out-a", required=True)
    p.add_argument("--out-b", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sketch", help="sketch A @ B from matrix files")
    p.add_argument("--a", required=True, help="A as CRMM1 binary or .csv")
    p.add_argument("--b", required=True, help="B as CRMM1 binary or .csv")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--t", type=int, required=True, help="distinct blocks (or draws with --rule fixed)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rule", choices=["until-distinct", "fixed"], default="until-distinct")
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("--out", help="write the estimated product here")
    p.add_argument("--plan-out", help="write the sampling plan JSON here")
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("variance-exp", help="error of optimal vs uniform sampling over rho")
    _add_config_flags(p, straggler=False)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("straggler-exp", help="exact vs compressed coded scheme on a trace")
    _add_config_flags(p, straggler=True)
    p.set_defaults(func=cmd_straggler)

    p = sub.add_parser("simulate", help="one compressed coded run on a trace")
    _add_config_flags(p, straggler=True)
    p.add_argument("--with-baseline", action="store_true", help="also time the exact scheme")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as JSON
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
