"""Block-wise CR sampling: distributions, sample plans and sketches.

The estimator of ``A @ B`` built here samples pairs of column-blocks of A
and row-blocks of B with replacement and rescales every sampled pair by
``1 / sqrt(n_draws * pi[block])``.  Sketches are assembled by copying and
scaling the sampled blocks; the Kronecker-structured selection matrices are
never formed.

Randomness comes from numpy's PCG64 via ``np.random.default_rng``.  Parallel
trials get independent streams from :func:`child_seeds`, which spawns
children of a ``SeedSequence``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .matrix import BlockPartition, check_compatible

DEFAULT_MAX_DRAWS = 10**9


class DegenerateDistribution(ValueError):
    pass


def child_seeds(seed: int, n: int) -> list[int]:
    """``n`` independent 64-bit seeds derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


@dataclass(frozen=True)
class SamplingDistribution:
    pi: np.ndarray
    norm_products: np.ndarray

    @property
    def K(self) -> int:
        return len(self.pi)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.pi > 0)


def compute_distribution(partA: BlockPartition, partB: BlockPartition) -> SamplingDistribution:
    """Probabilities proportional to ||A_i||_F * ||B_i||_F.

    This choice minimises the variance of the single-sample estimator.
    """
    check_compatible(partA, partB)
    prods = partA.norms() * partB.norms()
    total = prods.sum()
    if not total > 0:
        raise DegenerateDistribution("degenerate distribution: every block product is zero")
    return SamplingDistribution(pi=prods / total, norm_products=prods)


def uniform_distribution(K: int) -> SamplingDistribution:
    return SamplingDistribution(pi=np.full(K, 1.0 / K), norm_products=np.ones(K))


def variance_functional(q, norm_products) -> float:
    """sum_l ||A_l||^2 ||B_l||^2 / q_l.

    Subtracting ||AB||_F^2 gives E||AB - X||_F^2 for one draw from ``q``.
    Blocks with a zero norm product contribute nothing whatever q says.
    """
    q = np.asarray(q, dtype=np.float64)
    c = np.asarray(norm_products, dtype=np.float64) ** 2
    live = c > 0
    if np.any(q[live] <= 0):
        raise ValueError("infinite variance: zero probability on a block with nonzero product")
    return float(np.sum(c[live] / q[live]))


def optimal_variance_functional(norm_products) -> float:
    """Closed form of :func:`variance_functional` at the optimal probabilities."""
    return float(np.sum(norm_products)) ** 2


# -- sample plans -----------------------------------------------------------

Rule = Literal["until-distinct", "fixed", "exact"]


@dataclass(frozen=True)
class SamplingPlan:
    """A sampled multiset of block indices.

    ``pi`` holds the probabilities used for rescaling (length K), ``draws`` the
    multiset in draw order, ``distinct`` the sorted distinct indices and
    ``weights`` the per-block draw counts over all K blocks.
    """

    pi: np.ndarray
    draws: np.ndarray
    distinct: np.ndarray
    weights: np.ndarray
    seed: int | None = None
    rule: Rule = "until-distinct"

    @classmethod
    def from_draws(cls, pi, draws, seed=None, rule: Rule = "until-distinct") -> "SamplingPlan":
        pi = np.asarray(pi, dtype=np.float64)
        # heavy skew can need millions of draws; int32 halves the footprint
        draws = np.asarray(draws).astype(np.int32 if len(pi) < 2**31 else np.int64, copy=False)
        if draws.size == 0:
            raise ValueError("a plan needs at least one draw")
        if draws.min() < 0 or draws.max() >= len(pi):
            raise IndexError("draw index out of range")
        if np.any(pi[draws] <= 0):
            raise ValueError("plan draws a block with zero probability")
        weights = np.bincount(draws, minlength=len(pi)).astype(np.int64)
        return cls(pi, draws, np.flatnonzero(weights), weights, seed, rule)

    @property
    def K(self) -> int:
        return len(self.pi)

    @property
    def t(self) -> int:
        return len(self.distinct)

    @property
    def n_draws(self) -> int:
        return len(self.draws)

    @property
    def w_tilde(self) -> np.ndarray:
        return self.weights[self.distinct]

    @property
    def storage_reduction(self) -> float:
        """(||w~||_1 / ||w~||_0)^2: entries saved by the weighted sketch."""
        return (self.n_draws / self.t) ** 2

    def to_dict(self) -> dict:
        return {
            "pi": self.pi.tolist(),
            "draws": self.draws.tolist(),
            "distinct": self.distinct.tolist(),
            "weights": self.weights.tolist(),
            "seed": self.seed,
            "rule": self.rule,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingPlan":
        plan = cls.from_draws(d["pi"], d["draws"], d.get("seed"), d.get("rule", "until-distinct"))
        if "weights" in d and list(plan.weights) != list(d["weights"]):
            raise ValueError("weights inconsistent with draws")
        if "distinct" in d and list(plan.distinct) != list(d["distinct"]):
            raise ValueError("distinct set inconsistent with draws")
        return plan

    @classmethod
    def from_json(cls, text: str) -> "SamplingPlan":
        return cls.from_dict(json.loads(text))


def _sampler(pi: np.ndarray, rng: np.random.Generator):
    cdf = np.cumsum(pi)
    cdf /= cdf[-1]

    def draw(size: int) -> np.ndarray:
        return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int32, copy=False)

    return draw


def draw_until_distinct(
    dist: SamplingDistribution,
    t: int,
    seed: int | None = None,
    max_draws: int = DEFAULT_MAX_DRAWS,
) -> SamplingPlan:
    """Draw i.i.d. from ``dist.pi`` until ``t`` distinct blocks have appeared."""
    pi = np.asarray(dist.pi, dtype=np.float64)
    support = int(np.count_nonzero(pi > 0))
    if t < 1:
        raise ValueError("t must be at least 1")
    if t > support:
        raise ValueError(f"t={t} exceeds the support size {support}")
    draw = _sampler(pi, np.random.default_rng(seed))
    seen = np.zeros(len(pi), dtype=bool)
    n_seen = 0
    chunks = []
    total = 0
    size = min(max(64, 4 * t), max_draws)
    while True:
        idx = draw(size)
        uniq, first = np.unique(idx, return_index=True)
        fresh = np.sort(first[~seen[uniq]])
        need = t - n_seen
        if len(fresh) >= need:
            stop = fresh[need - 1] + 1
            if total + stop > max_draws:
                break
            chunks.append(idx[:stop])
            return SamplingPlan.from_draws(pi, np.concatenate(chunks), seed, "until-distinct")
        seen[uniq] = True
        n_seen += len(fresh)
        chunks.append(idx)
        total += size
        if total >= max_draws:
            break
        size = min(2 * size, 1 << 20, max_draws - total)
    raise RuntimeError(f"no {t} distinct blocks within {max_draws} draws")


def draw_fixed(dist: SamplingDistribution, m: int, seed: int | None = None) -> SamplingPlan:
    """Exactly ``m`` i.i.d. draws (the classical fixed-count estimator)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    draw = _sampler(np.asarray(dist.pi, dtype=np.float64), np.random.default_rng(seed))
    return SamplingPlan.from_draws(dist.pi, draw(m), seed, "fixed")


def exact_plan(K: int) -> SamplingPlan:
    """Every block once under uniform rescaling; its sketch product is exactly AB."""
    return SamplingPlan.from_draws(np.full(K, 1.0 / K), np.arange(K), None, "exact")


def select_stream(values: Iterable[float], seed=None) -> int:
    """Pick index i with probability values[i] / sum(values) in a single pass.

    Keeps only the running total and the current pick.
    """
    rng = np.random.default_rng(seed)
    total = 0.0
    pick = -1
    for i, v in enumerate(values):
        v = float(v)
        if not v >= 0:
            raise ValueError(f"value at position {i} is negative or NaN: {v}")
        if v == 0:
            continue
        total += v
        if rng.random() * total < v:
            pick = i
    if pick < 0:
        raise ValueError("stream has no positive value")
    return pick


# -- sketches ---------------------------------------------------------------


@dataclass(frozen=True)
class SketchPair:
    C: np.ndarray
    R: np.ndarray
    kind: Literal["unweighted", "weighted"]
    plan: SamplingPlan = field(repr=False)


def _gather(partA: BlockPartition, partB: BlockPartition, idx: np.ndarray, scale: np.ndarray):
    tau = partA.tau
    cols = (idx[:, None] * tau + np.arange(tau)).ravel()
    s = np.repeat(scale, tau)
    C = partA.source[:, cols] * s
    R = partB.source[cols, :] * s[:, None]
    return C, R


def _check_plan(partA: BlockPartition, partB: BlockPartition, plan: SamplingPlan) -> None:
    check_compatible(partA, partB)
    if plan.K != partA.K:
        raise ValueError(f"plan is over K={plan.K} blocks, partition has K={partA.K}")


def build_unweighted_sketch(partA, partB, plan: SamplingPlan) -> SketchPair:
    """One block per draw, repeats included, each scaled by 1/sqrt(|S| pi)."""
    _check_plan(partA, partB, plan)
    scale = 1.0 / np.sqrt(plan.n_draws * plan.pi[plan.draws])
    C, R = _gather(partA, partB, plan.draws, scale)
    return SketchPair(C, R, "unweighted", plan)


def weighted_scales(plan: SamplingPlan) -> np.ndarray:
    """sqrt(w_j) / sqrt(|S| pi_j) for every distinct sampled block j."""
    return np.sqrt(plan.w_tilde / (plan.n_draws * plan.pi[plan.distinct]))


def build_weighted_sketch(partA, partB, plan: SamplingPlan) -> SketchPair:
    """One block per distinct index; repeats are folded into sqrt(weight)."""
    _check_plan(partA, partB, plan)
    C, R = _gather(partA, partB, plan.distinct, weighted_scales(plan))
    return SketchPair(C, R, "weighted", plan)


def estimate_product(sketch: SketchPair) -> np.ndarray:
    return sketch.C @ sketch.R


def rescaled_blocks(partA, partB, plan: SamplingPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """Distinct sampled block pairs with 1/sqrt(|S| pi) folded into each side.

    The weights are left out, so ``sum_j w~_j A_j @ B_j`` over the result equals
    the product of the weighted sketch.  Both codecs consume this form.
    """
    _check_plan(partA, partB, plan)
    scale = 1.0 / np.sqrt(plan.n_draws * plan.pi[plan.distinct])
    return [(partA.block(i) * s, partB.block(i) * s) for i, s in zip(plan.distinct, scale)]


def weighted_target(blocks, w_tilde) -> np.ndarray:
    """Serial sum_j w~_j A_j @ B_j; the quantity both codecs must recover."""
    out = np.zeros((blocks[0][0].shape[0], blocks[0][1].shape[1]))
    for (Aj, Bj), w in zip(blocks, w_tilde):
        out += w * (Aj @ Bj)
    return out
