import itertools
import json

import numpy as np
import pytest

from wcmm import gc
from wcmm.matrix import matmul, partition
from wcmm.sampling import (
    SamplingPlan,
    build_weighted_sketch,
    compute_distribution,
    draw_until_distinct,
    estimate_product,
    exact_plan,
    rescaled_blocks,
    weighted_target,
)


def make_instance(K, seed=0, L=3, M=4, tau=2):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((L, K * tau)) * np.repeat(rng.uniform(size=K) ** -1, tau)
    B = rng.standard_normal((K * tau, M))
    return partition(A, B, K)


def sampled(K, t, seed=0):
    partA, partB = make_instance(K, seed)
    plan = draw_until_distinct(compute_distribution(partA, partB), t, seed=seed)
    return partA, partB, plan


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def all_decode(scheme, size):
    return all(gc.is_decodable(scheme, F) for F in itertools.combinations(range(scheme.n), size))


def run(scheme, plan, partA, partB, F):
    tasks = gc.encode_tasks(scheme, plan, partA, partB)
    return gc.decode(scheme, [gc.worker_compute(tasks[i]) for i in F])


class TestBuild:
    def test_full_replication(self):
        sch = gc.build_gc_scheme(2, 1)
        np.testing.assert_array_equal(sch.G, np.ones((2, 2)))
        for i in (0, 1):
            a = gc.decoding_vector(sch, [i])
            np.testing.assert_array_equal(a, np.eye(2)[i])

    @pytest.mark.parametrize("n,s", [(4, 1), (6, 2), (6, 1), (9, 2), (12, 3), (5, 0)])
    def test_structure(self, n, s):
        sch = gc.build_gc_scheme(n, s)
        assert sch.t == n
        assert set(np.unique(sch.G)) <= {0.0, 1.0}
        assert np.all(np.count_nonzero(sch.G, axis=0) == s + 1)
        assert np.all(np.count_nonzero(sch.G, axis=1) == s + 1)
        assert np.count_nonzero(sch.G) == sch.t * (s + 1)

    @pytest.mark.parametrize("n,s", [(4, 1), (6, 2), (8, 1), (8, 3), (12, 2)])
    def test_every_threshold_set_decodes(self, n, s):
        sch = gc.build_gc_scheme(n, s)
        for F in itertools.combinations(range(n), n - s):
            a = gc.decoding_vector(sch, F)
            assert np.all(a[np.setdiff1d(np.arange(n), F)] == 0)
            np.testing.assert_allclose(a @ sch.G, np.ones(sch.t), atol=1e-12)

    def test_randomized_sets_large(self):
        sch = gc.build_gc_scheme(500, 19)
        rng = np.random.default_rng(0)
        for _ in range(10**4):
            F = rng.choice(500, size=481, replace=False)
            a = gc.decoding_vector(sch, F)
            assert np.max(np.abs(a @ sch.G - 1)) <= 1e-12

    def test_invalid(self):
        with pytest.raises(ValueError):
            gc.build_gc_scheme(5, 1)
        with pytest.raises(ValueError):
            gc.build_gc_scheme(4, 4)
        with pytest.raises(ValueError):
            gc.build_gc_scheme(4, -1)


class TestDecodingVector:
    def test_all_workers(self):
        sch = gc.build_gc_scheme(6, 2)
        a = gc.decoding_vector(sch, range(6))
        np.testing.assert_allclose(a @ sch.G, np.ones(6), atol=1e-12)

    def test_lowest_id_tie_break(self):
        sch = gc.build_gc_scheme(4, 1)
        a = gc.decoding_vector(sch, [0, 1, 2])
        np.testing.assert_array_equal(a, [1, 0, 1, 0])

    def test_missing_replicas(self):
        sch = gc.build_gc_scheme(4, 1)
        # workers 0 and 1 are the only replicas of blocks 0 and 1
        with pytest.raises(gc.UndecodableSet):
            gc.decoding_vector(sch, [2])
        with pytest.raises(gc.UndecodableSet):
            gc.decoding_vector(sch, [2, 3])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            gc.decoding_vector(gc.build_gc_scheme(4, 1), [0, 7])


class TestEncodeCompute:
    def test_unit_weights_reduce_to_plain_cmm(self):
        partA, partB = make_instance(4)
        plan = SamplingPlan.from_draws(np.full(4, 0.25), [0, 1, 2, 3])
        sch = gc.build_gc_scheme(4, 1)
        tasks = gc.encode_tasks(sch, plan, partA, partB)
        for task, row in zip(tasks, sch.G):
            np.testing.assert_array_equal(task.coeffs, row[row != 0])

    def test_task_counts(self):
        partA, partB, plan = sampled(12, 6, seed=2)
        sch = gc.build_gc_scheme(6, 2)
        tasks = gc.encode_tasks(sch, plan, partA, partB)
        assert [len(t.blocks) for t in tasks] == [np.count_nonzero(r) for r in sch.G]
        assert sum(len(t.blocks) for t in tasks) == sch.t * (sch.s + 1)

    def test_t_mismatch(self):
        partA, partB, plan = sampled(12, 5)
        with pytest.raises(ValueError):
            gc.encode_tasks(gc.build_gc_scheme(6, 2), plan, partA, partB)

    def test_single_block(self):
        rng = np.random.default_rng(0)
        Aj, Bj = rng.standard_normal((2, 3)), rng.standard_normal((3, 2))
        out = gc.worker_compute(gc.WorkerTask(0, np.array([1.0]), [(Aj, Bj)]))
        np.testing.assert_allclose(out.partial_sum, Aj @ Bj, rtol=1e-15)

    def test_two_weighted_blocks(self):
        rng = np.random.default_rng(1)
        blocks = [(rng.standard_normal((2, 3)), rng.standard_normal((3, 2))) for _ in range(2)]
        out = gc.worker_compute(gc.WorkerTask(3, np.array([2.0, 3.0]), blocks))
        expected = 2 * blocks[0][0] @ blocks[0][1] + 3 * blocks[1][0] @ blocks[1][1]
        np.testing.assert_allclose(out.partial_sum, expected, rtol=1e-14)
        assert out.worker_id == 3

    def test_zero_weight(self):
        rng = np.random.default_rng(2)
        blocks = [(rng.standard_normal((2, 3)), rng.standard_normal((3, 2))) for _ in range(2)]
        out = gc.worker_compute(gc.WorkerTask(0, np.array([1.0, 0.0]), blocks))
        np.testing.assert_array_equal(out.partial_sum, blocks[0][0] @ blocks[0][1])


class TestDecode:
    def test_exact_plan_recovers_product(self):
        partA, partB = make_instance(6, seed=3)
        sch = gc.build_gc_scheme(6, 2)
        out = run(sch, exact_plan(6), partA, partB, [1, 3, 4, 5])
        assert rel(out, matmul(partA.source, partB.source)) <= 1e-13

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_serial_oracle_all_sets(self, seed):
        partA, partB, plan = sampled(24, 6, seed)
        sch = gc.build_gc_scheme(6, 2)
        oracle = weighted_target(rescaled_blocks(partA, partB, plan), plan.w_tilde)
        sketch = estimate_product(build_weighted_sketch(partA, partB, plan))
        outs = [run(sch, plan, partA, partB, F) for F in itertools.combinations(range(6), 4)]
        assert len(outs) == 15
        for out in outs:
            assert rel(out, oracle) <= 1e-10
            assert rel(out, sketch) <= 1e-10
            assert rel(out, outs[0]) <= 1e-12

    def test_below_threshold(self):
        partA, partB, plan = sampled(24, 6)
        sch = gc.build_gc_scheme(6, 2)
        with pytest.raises(gc.UndecodableSet):
            run(sch, plan, partA, partB, [0, 3, 5])

    def test_extra_responses_ok(self):
        partA, partB, plan = sampled(24, 6, seed=8)
        sch = gc.build_gc_scheme(6, 2)
        oracle = weighted_target(rescaled_blocks(partA, partB, plan), plan.w_tilde)
        assert rel(run(sch, plan, partA, partB, range(6)), oracle) <= 1e-12


class TestCompressedTolerance:
    def test_rho_one(self):
        sch = gc.build_gc_scheme(8, 1)
        assert gc.compressed_tolerance(sch, 1) is sch

    def test_n8_s1_rho2(self):
        comp = gc.compressed_tolerance(gc.build_gc_scheme(8, 1), 2)
        assert comp.s == 3 and comp.t == 4 and comp.construction == "fractional-repetition"
        assert all_decode(comp, 8 - 3)
        assert not all_decode(comp, 8 - 4)
        assert np.all(np.count_nonzero(comp.G, axis=0) == 4)
        assert np.all(np.count_nonzero(comp.G, axis=1) == 2)

    def test_500_workers_tolerance(self):
        comp = gc.compressed_tolerance(gc.build_gc_scheme(500, 19), 20)
        assert comp.s == 399
        assert comp.recovery_threshold == 101
        assert comp.t == 25

    def test_500_workers_structure_and_decoding(self):
        comp = gc.compressed_tolerance(gc.build_gc_scheme(500, 19), 20)
        assert comp.construction == "replicated-cyclic"
        # workload per worker is unchanged, replication grows to rho(s+1)
        assert np.all(np.count_nonzero(comp.G, axis=1) == 20)
        assert np.all(np.count_nonzero(comp.G, axis=0) == 400)
        rng = np.random.default_rng(1)
        for _ in range(300):
            F = rng.choice(500, size=101, replace=False)
            a = gc.decoding_vector(comp, F)
            assert np.max(np.abs(a @ comp.G - 1)) <= 1e-8
        # worst case for 399 stragglers: as many whole classes dead as possible
        classes = comp.classes
        dead = np.flatnonzero(np.isin(classes, np.arange(19)))[:380]
        rest = np.setdiff1d(np.arange(500), dead)
        extra = rest[np.isin(classes[rest], [19])][:19]
        F = np.setdiff1d(rest, extra)
        assert len(F) == 101
        assert gc.is_decodable(comp, F)

    def test_500_workers_tightness(self):
        comp = gc.compressed_tolerance(gc.build_gc_scheme(500, 19), 20)
        # 400 stragglers covering every replica of 20 consecutive virtual workers
        stragglers = np.flatnonzero(np.isin(comp.classes, np.arange(20)))
        assert len(stragglers) == 400
        F = np.setdiff1d(np.arange(500), stragglers)
        assert not gc.is_decodable(comp, F)

    def test_replicated_cyclic_exhaustive(self):
        # 4 does not divide 10, so the cyclic path is taken
        comp = gc.compressed_tolerance(gc.build_gc_scheme(10, 1), 2)
        assert comp.construction == "replicated-cyclic"
        assert comp.s == 3 and comp.t == 5
        assert all_decode(comp, 10 - 3)
        assert not all_decode(comp, 10 - 4)

    def test_cyclic_matrix_spans_ones(self):
        Gc = gc.cyclic_gc_matrix(7, 3)
        for rows in itertools.combinations(range(7), 4):
            sub = Gc[list(rows)]
            coef, *_ = np.linalg.lstsq(sub.T, np.ones(7), rcond=None)
            assert np.max(np.abs(coef @ sub - 1)) <= 1e-9
        assert np.all(np.count_nonzero(Gc, axis=1) == 4)

    def test_end_to_end_compressed(self):
        partA, partB = make_instance(40, seed=4)
        base = gc.build_gc_scheme(40, 3)
        comp = gc.compressed_tolerance(base, 5)
        assert comp.s == 19
        plan = draw_until_distinct(compute_distribution(partA, partB), comp.t, seed=4)
        oracle = estimate_product(build_weighted_sketch(partA, partB, plan))
        rng = np.random.default_rng(0)
        for _ in range(20):
            F = np.sort(rng.choice(40, size=comp.recovery_threshold, replace=False))
            assert rel(run(comp, plan, partA, partB, F), oracle) <= 1e-9

    def test_invalid(self):
        base = gc.build_gc_scheme(8, 1)
        with pytest.raises(ValueError):
            gc.compressed_tolerance(base, 3)  # does not divide t
        with pytest.raises(ValueError):
            gc.compressed_tolerance(base, 8)  # rho (s+1) > n
        with pytest.raises(ValueError):
            gc.compressed_tolerance(base, 0)
        with pytest.raises(ValueError):
            gc.compressed_tolerance(gc.compressed_tolerance(base, 2), 2)


def test_descriptor_json():
    sch = gc.compressed_tolerance(gc.build_gc_scheme(8, 1), 2)
    d = json.loads(sch.to_json())
    assert d["kind"] == "gc" and d["n"] == 8 and d["s"] == 3 and d["t"] == 4 and d["rho"] == 2
    assert d["assignments"][0] == [0, 1]
    assert d["recovery_threshold"] == 5
