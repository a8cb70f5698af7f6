import csv
import io
import json

import numpy as np
import pytest

from wcmm import experiments as ex
from wcmm.sim import synth_trace


SMALL = ex.ExperimentConfig(L=8, N=96, M=8, K=24, rhos=(2, 4, 8), trials=6, seed=3)


class TestConfig:
    def test_defaults(self):
        cfg = ex.VARIANCE_DESK
        assert (cfg.L, cfg.N, cfg.M, cfg.K, cfg.trials) == (64, 960, 64, 96, 10)
        assert cfg.rhos == (2, 4, 8, 16)

    def test_full_scale_tau(self):
        assert ex.VARIANCE_FULL.tau == 20
        assert ex.STRAGGLER_FULL.tau == 20

    def test_replace_ignores_none(self):
        cfg = SMALL.replace(K=None, seed=9)
        assert cfg.K == 24 and cfg.seed == 9

    @pytest.mark.parametrize(
        "changes", [{"K": 7}, {"trials": 0}, {"scheme": "lagrange"}, {"L": 0}]
    )
    def test_validate(self, changes):
        with pytest.raises(ValueError):
            SMALL.replace(**changes).validate()

    def test_json_roundtrip(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(SMALL.to_dict()))
        assert ex.ExperimentConfig.from_json(p) == SMALL

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"K": 4, "bogus": 1}))
        with pytest.raises(ValueError, match="bogus"):
            ex.ExperimentConfig.from_json(p)


class TestGenerator:
    def test_shapes_and_determinism(self):
        a, b = ex.gen_instance(SMALL, 1), ex.gen_instance(SMALL, 1)
        assert a.A.shape == (8, 96) and a.B.shape == (96, 8)
        np.testing.assert_array_equal(a.A, b.A)
        assert not np.array_equal(a.A, ex.gen_instance(SMALL, 2).A)

    def test_exponent_zero_is_near_uniform(self):
        inst = ex.gen_instance(ex.VARIANCE_DESK.replace(exponent=0.0), 0)
        assert inst.summary()["pi_ratio"] < 2

    def test_default_is_skewed(self):
        inst = ex.gen_instance(ex.VARIANCE_DESK, 0)
        assert inst.summary()["pi_ratio"] > 10

    def test_norm_product(self):
        inst = ex.gen_instance(SMALL, 0)
        expected = np.linalg.norm(inst.A) ** 2 * np.linalg.norm(inst.B) ** 2
        assert inst.norm_product == pytest.approx(expected, rel=1e-12)


class TestVariance:
    def test_rows(self):
        rows = ex.run_variance_experiment(SMALL)
        assert [r["rho"] for r in rows] == [2, 4, 8]
        assert [r["t"] for r in rows] == [12, 6, 3]
        for r in rows:
            assert r["mean_draws_weighted"] >= r["t"] and r["mean_draws_uniform"] >= r["t"]
            assert r["mean_err_weighted"] >= 0 and r["var_weighted"] >= 0

    def test_reproducible(self):
        assert ex.run_variance_experiment(SMALL) == ex.run_variance_experiment(SMALL)

    def test_weighted_beats_uniform(self):
        rows = ex.run_variance_experiment(SMALL.replace(trials=10))
        assert all(r["mean_err_weighted"] <= r["mean_err_uniform"] for r in rows)

    def test_error_grows_with_compression(self):
        rows = ex.run_variance_experiment(SMALL.replace(trials=20, rhos=(1, 2, 8)))
        errs = [r["mean_err_weighted"] for r in rows]
        assert errs[0] <= errs[1] <= errs[2]

    def test_desk_trend(self):
        rows = ex.run_variance_experiment(ex.VARIANCE_DESK)
        errs = [r["mean_err_weighted"] for r in rows]
        assert all(a <= b for a, b in zip(errs, errs[1:]))
        assert all(r["mean_err_weighted"] <= r["mean_err_uniform"] for r in rows)

    def test_bad_rho(self):
        with pytest.raises(ValueError, match="do not divide"):
            ex.run_variance_experiment(SMALL.replace(rhos=(5,)))

    def test_csv(self):
        rows = ex.run_variance_experiment(SMALL.replace(rhos=(2,), trials=2))
        text = ex.rows_to_csv(rows, ex.VARIANCE_COLUMNS)
        parsed = list(csv.DictReader(io.StringIO(text)))
        assert list(parsed[0]) == ex.VARIANCE_COLUMNS
        assert float(parsed[0]["mean_err_weighted"]) == rows[0]["mean_err_weighted"]


class TestStraggler:
    CFG = ex.ExperimentConfig(L=6, N=100, M=5, K=50, n=50, s=1, rho=5, seed=2)

    def test_gc_rows(self):
        rows = ex.run_straggler_experiment(self.CFG)
        exact, comp = rows
        assert exact["label"] == "exact" and exact["rel_error"] <= 1e-12
        assert exact["recovery_threshold"] == 49
        assert comp["tolerated_stragglers"] == 9 and comp["recovery_threshold"] == 41
        times = np.sort(synth_trace(50, 1.0, 1.0, ex.child_seeds(2, 2)[1]).times)
        assert comp["completion_time"] == times[40]
        assert exact["completion_time"] == times[48]
        assert comp["speedup"] == pytest.approx(times[40] / times[48])

    def test_trace_file(self, tmp_path):
        p = tmp_path / "trace.csv"
        p.write_text("\n".join(str(1.0 + i) for i in range(50)))
        rows = ex.run_straggler_experiment(self.CFG.replace(trace=str(p)))
        assert rows[1]["completion_time"] == 41.0

    def test_trace_size_mismatch(self, tmp_path):
        p = tmp_path / "trace.csv"
        p.write_text("1\n2\n")
        with pytest.raises(ValueError, match="2 workers"):
            ex.run_straggler_experiment(self.CFG.replace(trace=str(p)))

    def test_matdot(self):
        cfg = ex.ExperimentConfig(L=4, N=12, M=3, K=6, scheme="matdot", n=15, rho=3, seed=1)
        exact, comp = ex.run_straggler_experiment(cfg)
        assert exact["recovery_threshold"] == 11 and comp["recovery_threshold"] == 3
        assert exact["rel_error"] <= 1e-12
        assert comp["completion_time"] <= exact["completion_time"]

    def test_reproducible(self):
        assert ex.run_straggler_experiment(self.CFG) == ex.run_straggler_experiment(self.CFG)

    def test_full_scale_error_band(self):
        rows = ex.run_straggler_experiment(ex.STRAGGLER_FULL)
        comp = rows[1]
        assert comp["recovery_threshold"] == 101
        assert 1e-8 <= comp["rel_error"] <= 1e-5

    def test_gc_needs_k_equal_n(self):
        with pytest.raises(ValueError, match="K = n"):
            ex.run_straggler_experiment(self.CFG.replace(K=25))
