"""Weighted coded matrix multiplication from gradient codes.

A gradient code is an n x t encoding matrix ``G`` together with a rule that,
given the set F of responding workers, produces ``a`` supported on F with
``a @ G == 1``.  Worker i returns ``sum_j G[i, j] * w_j * X_j`` where
``X_j = A_j @ B_j`` is the j-th (rescaled) sampled block product, so the
server recovers ``sum_j w_j X_j`` as ``sum_i a_i * partial_i``.

Two encoders are provided.  Fractional repetition splits the workers into
groups of equal size that all hold the same blocks (binary ``G``).  When the
group size does not divide n after compression, the replicated cyclic code is
used instead: t virtual workers run a cyclic real-valued gradient code and
every virtual worker is copied onto n/t physical ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .sampling import SamplingPlan, rescaled_blocks

Construction = Literal["fractional-repetition", "replicated-cyclic"]

CYCLIC_SEED = 20200


class UndecodableSet(ValueError):
    pass


@dataclass(frozen=True)
class GcScheme:
    n: int
    s: int
    t: int
    G: np.ndarray = field(repr=False)
    construction: Construction = "fractional-repetition"
    rho: int = 1
    # worker i -> index of the replica class (group or virtual worker) it belongs to
    classes: np.ndarray = field(default=None, repr=False)

    @property
    def recovery_threshold(self) -> int:
        return self.n - self.s

    @property
    def task_support(self) -> list[np.ndarray]:
        return [np.flatnonzero(row) for row in self.G]

    def to_dict(self) -> dict:
        return {
            "kind": "gc",
            "n": self.n,
            "s": self.s,
            "t": self.t,
            "rho": self.rho,
            "construction": self.construction,
            "recovery_threshold": self.recovery_threshold,
            "assignments": [sup.tolist() for sup in self.task_support],
            "G": self.G.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _fractional_repetition(n: int, s: int, t: int, rho: int = 1) -> GcScheme:
    group = s + 1
    if n % group:
        raise ValueError(f"fractional repetition needs (s+1) | n, got n={n}, s={s}")
    n_groups = n // group
    if t % n_groups:
        raise ValueError(f"{n_groups} groups cannot share t={t} blocks evenly")
    per_group = t // n_groups
    classes = np.arange(n) // group
    G = np.zeros((n, t))
    for i, g in enumerate(classes):
        G[i, g * per_group : (g + 1) * per_group] = 1.0
    return GcScheme(n, s, t, G, "fractional-repetition", rho, classes)


def build_gc_scheme(n: int, s: int) -> GcScheme:
    """Fractional-repetition code with t = n tasks tolerating s stragglers."""
    if not 0 <= s < n:
        raise ValueError(f"need 0 <= s < n, got n={n}, s={s}")
    if n % (s + 1):
        raise ValueError(f"(s+1) must divide n, got n={n}, s={s}")
    return _fractional_repetition(n, s, n)


def cyclic_gc_matrix(n: int, s: int, seed: int = CYCLIC_SEED) -> np.ndarray:
    """Cyclic gradient code: row i is supported on blocks i, ..., i+s (mod n).

    Every row lies in the null space of a random s x n matrix H with H @ 1 = 0,
    so any n - s rows span that space and hence contain the all-ones vector.
    """
    if not 0 <= s < n:
        raise ValueError(f"need 0 <= s < n, got n={n}, s={s}")
    Gc = np.zeros((n, n))
    if s == 0:
        np.fill_diagonal(Gc, 1.0)
        return Gc
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((s, n))
    H[:, -1] = -H[:, :-1].sum(axis=1)
    for i in range(n):
        sup = (i + np.arange(s + 1)) % n
        Gc[i, sup[0]] = 1.0
        Gc[i, sup[1:]] = -np.linalg.solve(H[:, sup[1:]], H[:, sup[0]])
    return Gc


def _replicated_cyclic(n: int, s: int, t: int, s_total: int, rho: int) -> GcScheme:
    if n % t:
        raise ValueError(f"replicated cyclic code needs t | n, got n={n}, t={t}")
    virtual = cyclic_gc_matrix(t, s)
    classes = np.arange(n) % t
    return GcScheme(n, s_total, t, virtual[classes], "replicated-cyclic", rho, classes)


def compressed_tolerance(scheme: GcScheme, rho: int) -> GcScheme:
    """Trade a compression factor rho for tolerance rho*(s+1) - 1.

    The new code is over t/rho blocks, each held by rho*(s+1) workers, while
    every worker still holds s+1 blocks.
    """
    if rho != int(rho) or rho < 1:
        raise ValueError(f"rho must be a positive integer, got {rho}")
    rho = int(rho)
    if rho == 1:
        return scheme
    if scheme.rho != 1:
        raise ValueError("scheme is already compressed")
    n, s, t = scheme.n, scheme.s, scheme.t
    if t % rho:
        raise ValueError(f"rho={rho} does not divide t={t}")
    if rho * (s + 1) > n:
        raise ValueError(f"rho*(s+1)={rho * (s + 1)} exceeds n={n}")
    t_new, s_new = t // rho, rho * (s + 1) - 1
    group = s_new + 1
    if n % group == 0 and t_new % (n // group) == 0:
        return _fractional_repetition(n, s_new, t_new, rho)
    if t != n:
        raise ValueError("replicated cyclic compression needs a base code with t = n")
    return _replicated_cyclic(n, s, t_new, s_new, rho)


def decoding_vector(scheme: GcScheme, F: Iterable[int]) -> np.ndarray:
    """Vector a supported on F with a @ G = 1."""
    F = np.unique(np.fromiter(F, dtype=np.int64))
    if F.size and (F[0] < 0 or F[-1] >= scheme.n):
        raise IndexError("responder id out of range")
    a = np.zeros(scheme.n)
    # lowest responding id represents its replica class
    classes, first = np.unique(scheme.classes[F], return_index=True)
    reps = F[first]
    if scheme.construction == "fractional-repetition":
        n_classes = int(scheme.classes.max()) + 1
        if len(classes) < n_classes:
            dead = sorted(set(range(n_classes)) - set(classes.tolist()))
            raise UndecodableSet(f"undecodable set: no live replica for group(s) {dead}")
        a[reps] = 1.0
        return a
    if reps.size == 0:
        raise UndecodableSet("undecodable set: no responders")
    rows = scheme.G[reps]
    coef, *_ = np.linalg.lstsq(rows.T, np.ones(scheme.t), rcond=None)
    if np.max(np.abs(coef @ rows - 1.0)) > 1e-8:
        raise UndecodableSet(f"undecodable set: live classes {classes.tolist()} do not span 1")
    a[reps] = coef
    return a


def is_decodable(scheme: GcScheme, F: Iterable[int]) -> bool:
    try:
        decoding_vector(scheme, F)
    except UndecodableSet:
        return False
    return True


# -- encode / compute / decode ----------------------------------------------


@dataclass(frozen=True)
class WorkerTask:
    worker_id: int
    coeffs: np.ndarray
    blocks: list = field(repr=False)


@dataclass(frozen=True)
class WeightedTask:
    worker_id: int
    partial_sum: np.ndarray = field(repr=False)


def encode_tasks(scheme: GcScheme, plan: SamplingPlan, partA, partB) -> list[WorkerTask]:
    """Per-worker block pairs and coefficients G[i, j] * w~_j."""
    if plan.t != scheme.t:
        raise ValueError(f"scheme expects t={scheme.t} blocks, plan has t={plan.t}")
    blocks = rescaled_blocks(partA, partB, plan)
    w = plan.w_tilde.astype(np.float64)
    tasks = []
    for i, sup in enumerate(scheme.task_support):
        tasks.append(WorkerTask(i, scheme.G[i, sup] * w[sup], [blocks[j] for j in sup]))
    return tasks


def worker_compute(task: WorkerTask) -> WeightedTask:
    L, M = task.blocks[0][0].shape[0], task.blocks[0][1].shape[1]
    out = np.zeros((L, M))
    for c, (Aj, Bj) in zip(task.coeffs, task.blocks):
        if c != 0:
            out += c * (Aj @ Bj)
    return WeightedTask(task.worker_id, out)


def decode(scheme: GcScheme, responses: Iterable[WeightedTask]) -> np.ndarray:
    """Combine responding partial sums into sum_j w~_j X_j."""
    by_id = {r.worker_id: r.partial_sum for r in responses}
    if len(by_id) < scheme.recovery_threshold:
        raise UndecodableSet(
            f"undecodable set: {len(by_id)} responses, threshold {scheme.recovery_threshold}"
        )
    a = decoding_vector(scheme, by_id)
    out = None
    for i in sorted(by_id):
        if a[i] != 0:
            term = a[i] * by_id[i]
            out = term if out is None else out + term
    return out
