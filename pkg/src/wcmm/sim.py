"""Straggler simulation driven by per-worker completion times.

Only worker compute durations count: the server waits for the fastest
``recovery_threshold`` workers (ties broken by lower worker id), decodes
from their results and ignores the rest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gc, matdot
from .matrix import frobenius_norm, matmul
from .sampling import SamplingPlan


@dataclass(frozen=True)
class WorkerTrace:
    times: np.ndarray
    source: str = "csv"

    def __post_init__(self):
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ValueError("trace must be a non-empty vector of durations")
        if not np.all(self.times > 0) or not np.all(np.isfinite(self.times)):
            raise ValueError("trace durations must be finite and positive")

    @property
    def n(self) -> int:
        return len(self.times)


def load_trace(path: str | Path) -> WorkerTrace:
    """One duration per row; a non-numeric first row is taken as a header."""
    times = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            cell = row[0].strip()
            try:
                value = float(cell)
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}: row {lineno}: not a number: {cell!r}") from None
            if not (value > 0 and np.isfinite(value)):
                raise ValueError(f"{path}: row {lineno}: duration must be positive, got {value}")
            times.append(value)
    if not times:
        raise ValueError(f"{path}: trace is empty")
    return WorkerTrace(np.array(times), source=f"csv:{path}")


def synth_trace(n: int, shift: float = 1.0, rate: float = 1.0, seed=None) -> WorkerTrace:
    """Shifted-exponential durations: shift + Exp(rate)."""
    if n < 1:
        raise ValueError("n must be positive")
    if not shift >= 0:
        raise ValueError(f"shift must be >= 0, got {shift}")
    if not rate > 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    rng = np.random.default_rng(seed)
    times = shift + rng.exponential(1.0 / rate, size=n)
    # shift=0 can in principle round to an exact zero
    times = np.maximum(times, np.finfo(float).tiny)
    return WorkerTrace(times, source=f"synthetic:shifted-exponential(shift={shift},rate={rate},seed={seed})")


def save_trace(path: str | Path, trace: WorkerTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["duration"])
        for x in trace.times:
            w.writerow([repr(float(x))])


def fastest(trace: WorkerTrace, f: int) -> tuple[np.ndarray, float]:
    """Ids of the f fastest workers and the f-th smallest duration."""
    if not 1 <= f <= trace.n:
        raise ValueError(f"threshold {f} outside 1..{trace.n}")
    order = np.argsort(trace.times, kind="stable")
    return np.sort(order[:f]), float(trace.times[order[f - 1]])


@dataclass
class SimOutcome:
    scheme: str
    n: int
    rho: int
    tolerated: int
    recovery_threshold: int
    responders: np.ndarray
    completion_time: float
    decoded: np.ndarray = field(repr=False)
    rel_error: float
    baseline_time: float | None = None

    @property
    def speedup(self) -> float | None:
        if self.baseline_time is None:
            return None
        return self.completion_time / self.baseline_time

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "n": self.n,
            "rho": self.rho,
            "tolerated_stragglers": self.tolerated,
            "recovery_threshold": self.recovery_threshold,
            "responders": self.responders.tolist(),
            "completion_time": self.completion_time,
            "rel_error": self.rel_error,
            "baseline_time": self.baseline_time,
            "speedup": self.speedup,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _run_codec(scheme, responders, plan, partA, partB) -> np.ndarray:
    if isinstance(scheme, gc.GcScheme):
        tasks = gc.encode_tasks(scheme, plan, partA, partB)
        return gc.decode(scheme, [gc.worker_compute(tasks[i]) for i in responders])
    if isinstance(scheme, matdot.MatDotCode):
        encs = matdot.encode(scheme, plan, partA, partB)
        return matdot.decode(scheme, [matdot.worker_multiply(encs[i]) for i in responders])
    raise TypeError(f"unknown scheme type {type(scheme).__name__}")


def simulate(scheme, trace: WorkerTrace, plan: SamplingPlan, partA, partB, exact=None) -> SimOutcome:
    """Wait for the fastest recovery-threshold workers, decode, score.

    ``rel_error`` is ||AB - Y||_F^2 / (||A||_F^2 ||B||_F^2).  Pass ``exact`` to
    reuse a precomputed A @ B.
    """
    if trace.n != scheme.n:
        raise ValueError(f"trace has {trace.n} workers, scheme has n={scheme.n}")
    f = scheme.recovery_threshold
    responders, done = fastest(trace, f)
    decoded = _run_codec(scheme, responders, plan, partA, partB)
    if exact is None:
        exact = matmul(partA.source, partB.source)
    scale = (frobenius_norm(partA.source) * frobenius_norm(partB.source)) ** 2
    rel = frobenius_norm(exact - decoded) ** 2 / scale
    kind = "gc" if isinstance(scheme, gc.GcScheme) else "matdot"
    tolerated = scheme.n - f
    return SimOutcome(kind, scheme.n, scheme.rho, tolerated, f, responders, done, decoded, rel)


def speedup_report(outcome: SimOutcome, baseline: SimOutcome) -> float:
    """Completion time of ``outcome`` as a fraction of ``baseline``'s."""
    return outcome.completion_time / baseline.completion_time
