"""Weighted MatDot polynomial code over the reals.

Sampled block pairs (A_j, B_j), j = 0..t-1, are encoded as

    pA(x) = sum_j sqrt(w_j) A_j x^j,    pB(x) = sum_j sqrt(w_j) B_j x^(t-1-j)

and worker i returns pA(x_i) @ pB(x_i).  The product polynomial has degree
2(t-1) and its x^(t-1) coefficient is sum_j w_j A_j B_j, so any 2t-1
evaluations determine it.

Evaluation points are Chebyshev nodes of the first kind, handed out to
workers in Leja order so that every prefix of worker ids is well spread over
[-1, 1].  Extracting a single monomial coefficient from real samples is
exponentially ill-conditioned in t: with float64 data the decode is accurate
to ~1e-11 for t <= 10, ~1e-7 at t = 16 and loses all digits around t = 25.
:func:`forward_error_bound` gives the expected error for a response set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .sampling import SamplingPlan, rescaled_blocks


class BelowThreshold(ValueError):
    pass


def chebyshev_nodes(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.cos((2 * k + 1) * np.pi / (2 * n))


def leja_order(points: np.ndarray) -> np.ndarray:
    """Greedy Leja ordering: each next point maximises the product of distances."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    order = [int(np.argmax(np.abs(points)))]
    logdist = np.zeros(n)
    taken = np.zeros(n, dtype=bool)
    taken[order[0]] = True
    for _ in range(n - 1):
        with np.errstate(divide="ignore"):
            logdist += np.log(np.abs(points - points[order[-1]]))
        cand = np.where(taken, -np.inf, logdist)
        nxt = int(np.argmax(cand))
        order.append(nxt)
        taken[nxt] = True
    return points[np.array(order)]


@dataclass(frozen=True)
class MatDotCode:
    n: int
    t: int
    eval_points: np.ndarray = field(repr=False)
    rho: int = 1

    def __post_init__(self):
        if len(self.eval_points) != self.n:
            raise ValueError("need one evaluation point per worker")
        if len(np.unique(self.eval_points)) != self.n:
            raise ValueError("evaluation points must be pairwise distinct")

    @property
    def recovery_threshold(self) -> int:
        return 2 * self.t - 1

    def to_dict(self) -> dict:
        return {
            "kind": "matdot",
            "n": self.n,
            "t": self.t,
            "rho": self.rho,
            "eval_points": self.eval_points.tolist(),
            "recovery_threshold": self.recovery_threshold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def make_matdot_code(n: int, t: int) -> MatDotCode:
    if t < 1:
        raise ValueError("t must be at least 1")
    if n < 2 * t - 1:
        raise ValueError(f"insufficient workers: n={n} < 2t-1={2 * t - 1}")
    return MatDotCode(n, t, leja_order(chebyshev_nodes(n)))


def compressed_threshold(t: int, rho: int) -> int:
    """Recovery threshold after compressing t block pairs by a factor rho."""
    if rho < 1 or t % rho:
        raise ValueError(f"rho={rho} does not divide t={t}")
    return 2 * (t // rho) - 1


def compress(code: MatDotCode, rho: int) -> MatDotCode:
    """Same workers and points, t/rho block pairs, threshold 2(t/rho) - 1."""
    compressed_threshold(code.t, rho)
    return MatDotCode(code.n, code.t // rho, code.eval_points, code.rho * rho)


@dataclass(frozen=True)
class WorkerEncoding:
    worker_id: int
    x: float
    pA_eval: np.ndarray = field(repr=False)
    pB_eval: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Evaluation:
    worker_id: int
    x: float
    value: np.ndarray = field(repr=False)


def _horner(coefs: np.ndarray, x: np.ndarray) -> np.ndarray:
    # coefs[j] multiplies x**j; result has shape (len(x), *coefs.shape[1:])
    acc = np.zeros((len(x),) + coefs.shape[1:])
    xs = x.reshape((-1,) + (1,) * (coefs.ndim - 1))
    for c in coefs[::-1]:
        acc = acc * xs + c
    return acc


def encode_blocks(code: MatDotCode, blocks: Sequence, w_tilde=None) -> list[WorkerEncoding]:
    """Evaluate both encoding polynomials at every worker's point.

    With ``w_tilde=None`` this is plain (unweighted) MatDot.
    """
    t = len(blocks)
    if t != code.t:
        raise ValueError(f"code expects t={code.t} block pairs, got {t}")
    if code.n < 2 * t - 1:
        raise ValueError(f"insufficient workers: n={code.n} < 2t-1={2 * t - 1}")
    root_w = np.ones(t) if w_tilde is None else np.sqrt(np.asarray(w_tilde, dtype=np.float64))
    coefA = np.stack([r * Aj for r, (Aj, _) in zip(root_w, blocks)])
    # B_j multiplies x^(t-1-j): reverse so index = power
    coefB = np.stack([r * Bj for r, (_, Bj) in zip(root_w, blocks)])[::-1]
    x = np.asarray(code.eval_points, dtype=np.float64)
    pA, pB = _horner(coefA, x), _horner(coefB, x)
    return [WorkerEncoding(i, float(x[i]), pA[i], pB[i]) for i in range(code.n)]


def encode(code: MatDotCode, plan: SamplingPlan, partA, partB) -> list[WorkerEncoding]:
    if plan.t != code.t:
        raise ValueError(f"code expects t={code.t} block pairs, plan has t={plan.t}")
    return encode_blocks(code, rescaled_blocks(partA, partB, plan), plan.w_tilde)


def worker_multiply(enc: WorkerEncoding) -> Evaluation:
    return Evaluation(enc.worker_id, enc.x, enc.pA_eval @ enc.pB_eval)


def decode_weights(points: np.ndarray, t: int) -> np.ndarray:
    """lambda with sum_i lambda_i C(z_i) = [x^(t-1)] C for deg C <= 2t-2.

    lambda_i is the x^(t-1) coefficient of the i-th Lagrange basis polynomial:
    the barycentric weight of z_i times prod_{j != i} (x - z_j).  The
    leave-one-out product is split into prefix and suffix products, which
    avoids dividing the full node polynomial by (x - z_i).
    """
    z = np.asarray(points, dtype=np.float64)
    m = len(z)
    if m != 2 * t - 1:
        raise ValueError(f"need exactly {2 * t - 1} points, got {m}")
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    # prefix[i] = prod_{j<i} (x - z_j), suffix[i] = prod_{j>i} (x - z_j), coefficients by power
    prefix = np.zeros((m, m))
    suffix = np.zeros((m, m))
    prefix[0, 0] = suffix[m - 1, 0] = 1.0
    for i in range(1, m):
        prefix[i, 1:] = prefix[i - 1, :-1]
        prefix[i] -= z[i - 1] * prefix[i - 1]
        j = m - 1 - i
        suffix[j, 1:] = suffix[j + 1, :-1]
        suffix[j] -= z[j + 1] * suffix[j + 1]
    # [x^(t-1)] prefix_i * suffix_i
    k = np.arange(t)
    coef = np.einsum("ik,ik->i", prefix[:, k], suffix[:, t - 1 - k])
    return bary * coef


def extraction_condition(points: np.ndarray, t: int) -> float:
    """sum_i |lambda_i|: worst-case amplification of per-sample errors."""
    return float(np.abs(decode_weights(points, t)).sum())


def forward_error_bound(code: MatDotCode, responses: Iterable[Evaluation]) -> float:
    """First-order bound on the absolute Frobenius decode error from rounding.

    eps * sum_i |lambda_i| ||value_i||_F over the responses decode would use.
    Grows roughly like 10**(t/3) on Chebyshev points; divide by the norm of
    the target for a relative tolerance.
    """
    chosen = select_responses(code, responses)
    lam = decode_weights(np.array([r.x for r in chosen]), code.t)
    norms = np.array([np.linalg.norm(r.value) for r in chosen])
    return float(np.finfo(np.float64).eps * np.abs(lam) @ norms)


def select_responses(code: MatDotCode, responses: Iterable[Evaluation]) -> list[Evaluation]:
    """The 2t-1 responses with the lowest worker ids; refuses to guess below that."""
    by_id = {}
    for r in responses:
        by_id.setdefault(r.worker_id, r)
    chosen = []
    seen_x = set()
    for wid in sorted(by_id):
        r = by_id[wid]
        if r.x in seen_x:
            continue
        seen_x.add(r.x)
        chosen.append(r)
        if len(chosen) == code.recovery_threshold:
            return chosen
    raise BelowThreshold(
        f"below recovery threshold: {len(chosen)} distinct points, need {code.recovery_threshold}"
    )


def decode(code: MatDotCode, responses: Iterable[Evaluation]) -> np.ndarray:
    chosen = select_responses(code, responses)
    lam = decode_weights(np.array([r.x for r in chosen]), code.t)
    out = np.zeros_like(chosen[0].value)
    for coef, r in zip(lam, chosen):
        out += coef * r.value
    return out
