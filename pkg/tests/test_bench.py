import time

import numpy as np
import pytest

import seqfs.bench as bench
from seqfs.classifiers import FAMILIES
from seqfs.config import RunConfig, build_run_config
from seqfs.dataset import SyntheticSpec, generate_synthetic
from seqfs.selection import run_strategy


def small_synth(seed=0, sep=5.0, p=40):
    ds, mask = generate_synthetic(SyntheticSpec(80, p, 6, 3, sep, 1.0, seed=seed))
    return ds, mask


def test_baseline_rows_and_accuracy():
    ds, _ = small_synth()
    rows = bench.run_baseline(RunConfig(seed=1), ds)
    assert [r.family for r in rows] == list(FAMILIES) and len(rows) == 6
    for r in rows:
        assert r.test_accuracy >= 0.9, r
        assert 0 <= r.train_accuracy <= 1


def test_baseline_is_deterministic():
    ds, _ = small_synth(seed=4, sep=2.0)
    a = bench.run_baseline(RunConfig(seed=2), ds)
    b = bench.run_baseline(RunConfig(seed=2), ds)
    assert a == b


def test_benchmark_rows_and_counts():
    ds, _ = small_synth(seed=1, sep=3.0, p=60)
    rep = bench.run_benchmark(RunConfig(seed=3), ds, "toy")
    assert [r.strategy for r in rep.rows] == ["tree_based", "rfecv", "rfe", "combined"]
    assert all(r.error is None for r in rep.rows)
    comb, tree = rep.row("combined"), rep.row("tree")
    assert comb.n_selected <= tree.n_selected
    # auto target: standalone RFE keeps as many features as the cascade
    assert rep.row("rfe").n_selected == comb.n_selected
    assert list(comb.stage_times) == ["tree_based", "rfecv", "rfe"]
    assert comb.wall_time_seconds == pytest.approx(sum(comb.stage_times.values()), rel=1e-12)
    assert rep.n_train + rep.n_test == 80 and rep.n_features == 60


def test_stage_times_account_for_wall_time():
    ds, _ = small_synth(seed=2, sep=3.0, p=120)
    cfg = RunConfig(seed=0).selector_config()
    t0 = time.perf_counter()
    res = run_strategy("combined", ds, cfg)
    outer = time.perf_counter() - t0
    inner = sum(s.wall_time_seconds for s in res.stages)
    assert inner <= outer
    assert outer - inner <= max(0.01 * outer, 0.005)


def test_integer_rfe_target():
    ds, _ = small_synth(seed=1, p=30)
    cfg = build_run_config({"bench.rfe_target": "7"}, seed=1)
    rep = bench.run_benchmark(cfg, ds, strategies=("rfe",))
    assert [r.strategy for r in rep.rows] == ["rfe"] and rep.rows[0].n_selected == 7


def test_auto_target_without_combined_uses_half():
    ds, _ = small_synth(seed=1, p=30)
    rep = bench.run_benchmark(RunConfig(seed=1), ds, strategies=("rfe",))
    assert rep.rows[0].n_selected == 15


def test_strategy_failure_is_recorded(monkeypatch):
    ds, _ = small_synth(seed=1, p=30)

    def flaky(strategy, *a, **kw):
        if strategy == "rfecv":
            raise RuntimeError("solver exploded")
        return run_strategy(strategy, *a, **kw)

    monkeypatch.setattr(bench, "run_strategy", flaky)
    rep = bench.run_benchmark(RunConfig(seed=1), ds)
    assert rep.row("rfecv").error == "RuntimeError: solver exploded"
    assert rep.row("rfecv").report is None
    assert all(rep.row(s).error is None for s in ("tree", "rfe", "combined"))
    header, rows = rep.csv_rows(timing=False)
    assert rows[1][-1] == "RuntimeError: solver exploded" and rows[1][2] == ""


def test_report_without_timing_is_reproducible():
    ds, _ = small_synth(seed=5, p=30)
    a = bench.run_benchmark(RunConfig(seed=8), ds).to_dict(timing=False)
    b = bench.run_benchmark(RunConfig(seed=8), ds).to_dict(timing=False)
    assert a == b
    assert "environment" not in a and all("wall_time_seconds" not in r for r in a["rows"])
    assert "feature selection only" in a["note"]


def test_environment_note_fields():
    env = bench.environment_note()
    assert {"host", "date", "python", "numpy"} <= env.keys()
    assert env["numpy"] == np.__version__
