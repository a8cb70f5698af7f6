"""Variance-vs-compression and straggler experiments.

Every number emitted here is a deterministic function of the config and its
seed: instance ``k`` uses child seed ``k`` of ``seed``, and the samplers draw
from further children keyed by (rho, trial).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gc, matdot
from .matrix import frobenius_norm, matmul, partition
from .sampling import (
    build_weighted_sketch,
    child_seeds,
    compute_distribution,
    draw_until_distinct,
    estimate_product,
    exact_plan,
    uniform_distribution,
)
from .sim import SimOutcome, load_trace, simulate, synth_trace

VARIANCE_COLUMNS = [
    "rho",
    "t",
    "trials",
    "mean_err_weighted",
    "var_weighted",
    "mean_err_uniform",
    "var_uniform",
    "mean_draws_weighted",
    "mean_draws_uniform",
]

STRAGGLER_COLUMNS = [
    "label",
    "scheme",
    "n",
    "rho",
    "tolerated_stragglers",
    "recovery_threshold",
    "completion_time",
    "speedup",
    "rel_error",
]


@dataclass
class ExperimentConfig:
    L: int = 64
    N: int = 960
    M: int = 64
    K: int = 96
    rhos: tuple[int, ...] = (2, 4, 8, 16)
    trials: int = 10
    seed: int = 0
    exponent: float = 2.0
    scheme: str = "gc"
    n: int = 500
    s: int = 19
    rho: int = 20
    trace: str | None = None
    shift: float = 1.0
    rate: float = 1.0
    output: str | None = None

    def __post_init__(self):
        self.rhos = tuple(int(r) for r in self.rhos)

    @property
    def tau(self) -> int:
        return self.N // self.K

    def validate(self) -> "ExperimentConfig":
        if min(self.L, self.N, self.M, self.K) < 1:
            raise ValueError("L, N, M, K must be positive")
        if self.N % self.K:
            raise ValueError(f"K={self.K} must divide N={self.N}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.scheme not in ("gc", "matdot"):
            raise ValueError(f"scheme must be 'gc' or 'matdot', got {self.scheme!r}")
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["rhos"] = list(self.rhos)
        return d


# desk-scale defaults are small; full-scale uses the larger instance sizes
VARIANCE_DESK = ExperimentConfig()
VARIANCE_FULL = ExperimentConfig(L=260, N=9600, M=280, K=480)
STRAGGLER_DESK = ExperimentConfig(L=32, N=5000, M=32, K=500, n=500, s=19, rho=20)
STRAGGLER_FULL = ExperimentConfig(L=260, N=10_000, M=280, K=500, n=500, s=19, rho=20)


@dataclass(frozen=True)
class Instance:
    A: np.ndarray
    B: np.ndarray
    K: int
    scales: np.ndarray = field(repr=False)

    @property
    def norm_product(self) -> float:
        """||A||_F^2 ||B||_F^2."""
        return (frobenius_norm(self.A) * frobenius_norm(self.B)) ** 2

    def summary(self) -> dict:
        partA, partB = partition(self.A, self.B, self.K)
        pi = compute_distribution(partA, partB).pi
        live = pi[pi > 0]
        return {
            "L": self.A.shape[0],
            "N": self.A.shape[1],
            "M": self.B.shape[1],
            "K": self.K,
            "norm_product": self.norm_product,
            "pi_max": float(live.max()),
            "pi_min": float(live.min()),
            "pi_ratio": float(live.max() / live.min()),
        }


def gen_instance(config: ExperimentConfig, seed=None) -> Instance:
    """Gaussian A and B; column-block i of A is scaled by u_i**(-exponent).

    u_i ~ Uniform(0, 1), so the block norms follow a power law: exponent 0
    gives a near-uniform sampling distribution, and larger exponents give
    heavier tails (infinite variance of the scale from exponent 1/2 on).
    """
    config.validate()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    A = rng.standard_normal((config.L, config.N))
    B = rng.standard_normal((config.N, config.M))
    scales = rng.uniform(size=config.K) ** (-config.exponent)
    A *= np.repeat(scales, config.tau)
    A.flags.writeable = False
    B.flags.writeable = False
    return Instance(A, B, config.K, scales)


def _sq_error(partA, partB, plan, exact) -> float:
    Y = estimate_product(build_weighted_sketch(partA, partB, plan))
    return frobenius_norm(exact - Y) ** 2


def run_variance_experiment(config: ExperimentConfig) -> list[dict]:
    """Squared Frobenius error of optimal vs uniform block sampling per rho.

    Each trial is a fresh instance (shared across rho values); both samplers
    stop at t = K / rho distinct blocks.
    """
    config.validate()
    bad = [r for r in config.rhos if r < 1 or config.K % r]
    if bad:
        raise ValueError(f"compression factors {bad} do not divide K={config.K}")
    inst_seeds = child_seeds(config.seed, config.trials)
    instances = []
    for sd in inst_seeds:
        inst = gen_instance(config, sd)
        partA, partB = partition(inst.A, inst.B, config.K)
        instances.append((partA, partB, compute_distribution(partA, partB), matmul(inst.A, inst.B)))
    uniform = uniform_distribution(config.K)
    rows = []
    for rho in config.rhos:
        t = config.K // rho
        seeds = child_seeds(config.seed + 7919 * rho, 2 * config.trials)
        errs_w, errs_u, draws_w, draws_u = [], [], [], []
        for k, (partA, partB, dist, exact) in enumerate(instances):
            pw = draw_until_distinct(dist, t, seeds[2 * k])
            pu = draw_until_distinct(uniform, t, seeds[2 * k + 1])
            errs_w.append(_sq_error(partA, partB, pw, exact))
            errs_u.append(_sq_error(partA, partB, pu, exact))
            draws_w.append(pw.n_draws)
            draws_u.append(pu.n_draws)
        rows.append(
            {
                "rho": rho,
                "t": t,
                "trials": config.trials,
                "mean_err_weighted": float(np.mean(errs_w)),
                "var_weighted": float(np.var(errs_w)),
                "mean_err_uniform": float(np.mean(errs_u)),
                "var_uniform": float(np.var(errs_u)),
                "mean_draws_weighted": float(np.mean(draws_w)),
                "mean_draws_uniform": float(np.mean(draws_u)),
            }
        )
    return rows


def _trace_for(config: ExperimentConfig):
    if config.trace:
        trace = load_trace(config.trace)
        if trace.n != config.n:
            raise ValueError(f"trace has {trace.n} workers, config n={config.n}")
        return trace
    return synth_trace(config.n, config.shift, config.rate, child_seeds(config.seed, 2)[1])


def build_schemes(config: ExperimentConfig):
    """(exact baseline, compressed) codes for the configured scheme."""
    if config.scheme == "gc":
        base = gc.build_gc_scheme(config.n, config.s)
        if base.t != config.K:
            raise ValueError(f"the exact GC baseline needs K = n, got K={config.K}, n={config.n}")
        return base, gc.compressed_tolerance(base, config.rho)
    base = matdot.make_matdot_code(config.n, config.K)
    return base, matdot.compress(base, config.rho)


def run_single(config: ExperimentConfig, scheme, trace, inst: Instance, exact=None) -> SimOutcome:
    partA, partB = partition(inst.A, inst.B, config.K)
    if scheme.rho == 1:
        plan = exact_plan(config.K)
    else:
        dist = compute_distribution(partA, partB)
        plan = draw_until_distinct(dist, scheme.t, child_seeds(config.seed, 3)[2])
    return simulate(scheme, trace, plan, partA, partB, exact)


def run_straggler_experiment(config: ExperimentConfig) -> list[dict]:
    """Exact (rho = 1) scheme vs compressed scheme on the same trace and instance."""
    config.validate()
    inst = gen_instance(config, child_seeds(config.seed, 1)[0])
    trace = _trace_for(config)
    base, comp = build_schemes(config)
    exact = matmul(inst.A, inst.B)
    out_base = run_single(config, base, trace, inst, exact)
    out_comp = run_single(config, comp, trace, inst, exact)
    out_base.baseline_time = out_base.completion_time
    out_comp.baseline_time = out_base.completion_time
    rows = []
    for label, o in (("exact", out_base), ("compressed", out_comp)):
        rows.append(
            {
                "label": label,
                "scheme": o.scheme,
                "n": o.n,
                "rho": o.rho,
                "tolerated_stragglers": o.tolerated,
                "recovery_threshold": o.recovery_threshold,
                "completion_time": o.completion_time,
                "speedup": o.speedup,
                "rel_error": o.rel_error,
            }
        )
    return rows


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns})
    return buf.getvalue()
