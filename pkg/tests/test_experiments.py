"""Replication-engine tests at small scale.

The full-scale numeric bands live in the acceptance suite; these tests
pin the engine mechanics: determinism, worker independence, per-replicate
nesting, and the table shapes each study emits.
"""

import numpy as np
import pytest

from tbounds.core import BoundInterval, TboundsError
from tbounds import experiments
from tbounds.dgp import preset
from tbounds.experiments import (
    LambdaRow,
    ReplicateFailure,
    ReplicationResult,
    SweepSummary,
    bangbang_snapshot,
    baselines_study,
    breakeven_lambda,
    breakeven_study,
    id_vs_est_study,
    oracle_width,
    robustness_study,
    run_sweep,
    scaling_study,
    weight_sensitivity_study,
    wilson_interval,
)

GRID = (1.0, 1.5, 2.5)


def small_sweep(**over):
    kw = dict(spec=preset("linear"), n_r=80, n_o=120, lambda_grid=GRID,
              n_reps=8, weight_mode="oracle", seed=900)
    kw.update(over)
    return run_sweep(**kw)


class TestWilson:
    def test_known_value(self):
        lo, hi = wilson_interval(successes=8, trials=10)
        # standard Wilson 95% interval for 0.8 at n=10
        assert lo == pytest.approx(0.4902, abs=2e-3)
        assert hi == pytest.approx(0.9433, abs=2e-3)

    def test_brackets_proportion(self):
        for k, n in [(0, 10), (10, 10), (3, 7), (199, 200)]:
            lo, hi = wilson_interval(k, n)
            assert 0.0 <= lo <= k / n <= hi <= 1.0


class TestRunSweep:
    def test_deterministic(self):
        a = small_sweep()
        b = small_sweep()
        for ra, rb in zip(a.rows, b.rows):
            assert (ra.coverage, ra.mean_width) == (rb.coverage, rb.mean_width)
        for pa, pb in zip(a.replications, b.replications):
            assert pa.lambda_min == pb.lambda_min
            assert pa.naive == pb.naive

    def test_workers_do_not_change_results(self):
        a = small_sweep()
        b = small_sweep(workers=4)
        for ra, rb in zip(a.rows, b.rows):
            assert (ra.coverage, ra.mean_width) == (rb.coverage, rb.mean_width)
        assert [p.naive for p in a.replications] == [p.naive for p in b.replications]

    def test_point_identified_column(self):
        s = small_sweep(lambda_grid=(1.0, 2.0))
        assert s.rows[0].mean_width == pytest.approx(0.0, abs=1e-12)
        assert s.rows[0].coverage <= 0.2  # a point estimate essentially never covers

    def test_coverage_monotone_rows(self):
        s = small_sweep(lambda_grid=(1.0, 1.3, 1.8, 2.5, 4.0), n_reps=20)
        cov = [r.coverage for r in s.rows]
        assert np.all(np.diff(cov) >= 0)

    def test_replication_invariants(self):
        s = small_sweep(n_reps=12)
        assert len(s.replications) == 12
        for rep in s.replications:
            flags = np.array(rep.covered, dtype=int)
            assert np.all(np.diff(flags) >= 0)
            if rep.lambda_min is not None:
                k = list(s.grid).index(rep.lambda_min)
                assert rep.covered[k]
                assert not any(rep.covered[:k])

    def test_wilson_attached(self):
        s = small_sweep()
        for row in s.rows:
            assert 0.0 <= row.cov_low <= row.coverage <= row.cov_high <= 1.0

    def test_bootstrap_attached_when_requested(self):
        s = small_sweep(bootstrap_resamples=60)
        for rep in s.replications:
            lo, hi = rep.bootstrap
            assert lo <= hi

    def test_replicate_failure_reports_seed(self, monkeypatch):
        calls = {"n": 0}
        real = experiments.generate

        def boom(spec, n_r, n_o, seed):
            calls["n"] += 1
            if calls["n"] == 3:
                raise ValueError("synthetic failure")
            return real(spec, n_r, n_o, seed)

        monkeypatch.setattr(experiments, "generate", boom)
        with pytest.raises(ReplicateFailure, match="902"):
            small_sweep()

    def test_bad_grid_or_reps(self):
        with pytest.raises(Exception):
            small_sweep(lambda_grid=(2.0, 1.0))
        with pytest.raises(ValueError):
            small_sweep(n_reps=0)
        with pytest.raises(ValueError):
            small_sweep(weight_mode="psychic")


class TestOracleWidth:
    def test_point_identified_is_zero(self):
        assert oracle_width(preset("linear"), 1.0, n_big=10**4, seed=1) == 0.0

    def test_rough_magnitude(self):
        w = oracle_width(preset("linear"), 2.0, n_big=2 * 10**4, seed=2)
        assert w == pytest.approx(2.815, abs=0.2)

    def test_small_n_big_rejected(self):
        with pytest.raises(ValueError):
            oracle_width(preset("linear"), 2.0, n_big=10**3, seed=3)


class TestBreakeven:
    def fake_sweep(self, coverages, grid=(1.0, 1.1, 1.2, 1.3)):
        rows = tuple(
            LambdaRow(lam=g, coverage=c, cov_low=0.0, cov_high=1.0, mean_width=1.0)
            for g, c in zip(grid, coverages)
        )
        return SweepSummary(grid=tuple(grid), rows=rows, replications=(), true_tau=0.0,
                            n_r=1, n_o=1, n_reps=1, weight_mode="oracle", base_seed=0,
                            bounds_seconds=0.0, total_seconds=0.0)

    def test_first_crossing(self):
        s = self.fake_sweep([0.2, 0.9, 0.96, 0.99])
        assert breakeven_lambda(s, 0.95) == 1.2

    def test_none_when_absent(self):
        s = self.fake_sweep([0.1, 0.2, 0.3, 0.4])
        assert breakeven_lambda(s, 0.95) is None

    def test_study_rows(self):
        rows = breakeven_study(gamma_os=(0.25, 0.5), n_r=60, n_o=80, n_reps=6,
                               lambda_grid=tuple(np.round(np.arange(1.0, 2.01, 0.25), 10)),
                               seed=7)
        assert [r["gamma_o"] for r in rows] == [0.25, 0.5]
        for row in rows:
            assert set(row) >= {"gamma_o", "breakeven_lambda", "tail_trimmed_lambda", "true_tau"}
            assert row["tail_trimmed_lambda"] > 1.0


class TestStudies:
    def test_baselines_rows(self):
        rows = baselines_study(spec=preset("linear"), n_r=60, n_o=80, lams=(1.5, 2.0),
                               n_reps=8, bootstrap_resamples=60, seed=11)
        procs = {(r["procedure"], r["lam"]) for r in rows}
        assert ("naive", "") in procs and ("bootstrap", "") in procs
        assert ("sharp", 1.5) in procs and ("sharp", 2.0) in procs
        assert ("worst_case", "") in procs
        by_proc = {r["procedure"]: r for r in rows if r["procedure"] in ("naive", "worst_case")}
        assert by_proc["naive"]["coverage"] == 0.0
        assert by_proc["worst_case"]["coverage"] == 1.0

    def test_scaling_rows(self):
        rows = scaling_study(spec=preset("linear"), n_r_list=(60, 120), lam=2.0,
                             n_reps=4, n_o=80, seed=12)
        assert [r["n_r"] for r in rows] == [60, 120]
        for row in rows:
            assert row["bounds_ms_per_call"] > 0.0
            assert np.isfinite(row["mean_width"]) and np.isfinite(row["sharpness"])

    def test_scaling_requires_ascending(self):
        with pytest.raises(ValueError):
            scaling_study(spec=preset("linear"), n_r_list=(100, 50), lam=2.0,
                          n_reps=2, n_o=80, seed=13)

    def test_id_vs_est_rows(self):
        rows = id_vs_est_study(spec=preset("linear"), n_r_list=(60, 120), n_o=80,
                               lams=(2.0,), n_reps=4, bootstrap_resamples=60, seed=14)
        boot = [r for r in rows if r["procedure"] == "bootstrap"]
        sharp = [r for r in rows if r["procedure"] == "sharp"]
        assert [r["n_r"] for r in boot] == [60, 120]
        assert all(r["lam"] == 2.0 for r in sharp)

    def test_robustness_rows(self):
        rows = robustness_study(kinds=("linear", "binary"), lams=(1.5, 2.0),
                                n_r=60, n_o=80, n_reps=4, seed=15)
        assert len(rows) == 4
        assert {r["kind"] for r in rows} == {"linear", "binary"}
        for row in rows:
            assert 0.0 <= row["coverage"] <= 1.0

    def test_weight_sensitivity_rows(self):
        rows = weight_sensitivity_study(spec=preset("linear"), lams=(2.0,),
                                        n_r=80, n_o=120, n_reps=4, seed=16)
        strategies = {r["strategy"] for r in rows}
        assert strategies == {"oracle", "fitted", "fitted_x1"}
        for row in rows:
            assert row["mean_ess"] > 0.0
            assert row["mean_max_weight"] >= 1.0 or row["strategy"] != "oracle"

    def test_weight_sensitivity_needs_linear(self):
        with pytest.raises(ValueError):
            weight_sensitivity_study(spec=preset("binary"), lams=(2.0,),
                                     n_r=40, n_o=40, n_reps=2, seed=17)


class TestBangBang:
    def test_identity_at_lambda_one(self):
        snap = bangbang_snapshot(preset("linear"), n_r=100, lam=1.0, seed=18)
        for m in snap.multipliers.values():
            np.testing.assert_array_equal(m.values, 1.0)

    def test_single_interior(self):
        snap = bangbang_snapshot(preset("linear"), n_r=500, lam=2.0, seed=19)
        assert set(snap.multipliers) == {(1, "lower"), (1, "upper"), (-1, "lower"), (-1, "upper")}
        for (arm, direction), m in snap.multipliers.items():
            assert m.n_interior == 1
            diffs = np.diff(m.values)
            if direction == "upper":
                assert np.all(diffs >= -1e-12)
            else:
                assert np.all(diffs <= 1e-12)

    def test_table_shape(self):
        snap = bangbang_snapshot(preset("linear"), n_r=60, lam=2.0, seed=20)
        table = snap.table()
        # every trial unit appears once per direction
        assert len(table) == 2 * 60
        assert set(table[0]) == {"arm", "direction", "index", "outcome", "prob", "multiplier"}


class TestReplicationResult:
    def test_rejects_nonmonotone_coverage(self):
        ivs = (BoundInterval(0.0, 1.0, 1.0), BoundInterval(-1.0, 2.0, 2.0))
        with pytest.raises(ValueError):
            ReplicationResult(replicate_id=0, intervals=ivs, covered=(True, False),
                              lambda_min=1.0, naive=0.5, bootstrap=None)
