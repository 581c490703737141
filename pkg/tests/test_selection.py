import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqfs.classifiers import ModelSpec, fit_arrays, predict, ranking_criterion
from seqfs.dataset import ExpressionMatrix, LabeledDataset, SyntheticSpec, generate_synthetic, stratified_kfold
from seqfs.errors import ConfigError, DataError
from seqfs.selection import (FROM_RFECV, SelectionResult, SelectorConfig, Stage, optimal_size, rfe, rfe_schedule,
                             rfecv, run_strategy, sequential_select, tree_select)
from seqfs.seeding import derive_seed

from oracles import all_pairs, naive_rfe_path

SVC = ModelSpec("linear_svc", seed=3)


def make_ds(X, y):
    X = np.asarray(X, float)
    X = X - min(X.min(), 0.0)
    m = ExpressionMatrix(X, [f"s{i}" for i in range(X.shape[0])], [f"f{j}" for j in range(X.shape[1])])
    return LabeledDataset(m, np.asarray(y), tuple(f"c{c}" for c in range(int(np.max(y)) + 1)))


class Counter:
    def __init__(self):
        self.calls = []

    def __call__(self, spec, X, y, n_classes):
        self.calls.append(X.shape[1])
        return fit_arrays(spec, X, y, n_classes)


def two_informative(seed=0):
    r = np.random.default_rng(seed)
    y = np.repeat([0, 1], 30)
    X = r.normal(0, 1, size=(60, 10))
    X[:, :2] += np.where(y == 1, 1.2, -1.2)[:, None]
    return make_ds(X, y)


def cv_accuracy(ds, cols, k=2, seed=0, spec=SVC):
    plan = stratified_kfold(ds.labels, k, seed)
    acc = []
    for tr, va in plan.folds():
        model = fit_arrays(spec, ds.X[tr][:, cols], ds.labels[tr], ds.n_classes)
        acc.append(np.mean(predict(model, ds.X[va][:, cols]) == ds.labels[va]))
    return float(np.mean(acc))


# ---------------------------------------------------------------- schedule and counters

def test_schedule_examples():
    assert rfe_schedule(5, 2, 1) == [5, 4, 3, 2]
    assert rfe_schedule(5, 5, 1) == [5]
    assert rfe_schedule(100, 10, 0.1) == [100, 90, 81, 72, 64, 57, 51, 45, 40, 36, 32, 28, 25, 22, 19, 17, 15, 13, 11, 10]
    assert rfe_schedule(10, 1, 4) == [10, 6, 2, 1]
    with pytest.raises(ConfigError):
        rfe_schedule(5, 6, 1)
    with pytest.raises(ConfigError):
        rfe_schedule(5, 2, 0)
    with pytest.raises(ConfigError):
        rfe_schedule(5, 2, 1.5)


def test_rfe_without_elimination_fits_once():
    ds = two_informative()
    c = Counter()
    res = rfe(ds, SVC, 10, step=1, fit=c)
    assert c.calls == [10]
    assert res.final_selected == ds.feature_ids
    assert res.stages[0].ranking.tolist() == [1] * 10


def test_rfe_step_one_five_to_two_fits_four_times(rng):
    X = rng.normal(size=(20, 5))
    y = np.repeat([0, 1], 10)
    c = Counter()
    res = rfe(make_ds(X, y), SVC, 2, step=1, fit=c)
    assert len(c.calls) == 4 == res.stages[0].n_fits
    assert c.calls == [5, 4, 3, 2]
    assert sorted(res.stages[0].ranking.tolist()) == [1, 1, 2, 3, 4]


@given(st.integers(2, 30), st.integers(1, 30), st.sampled_from([1, 2, 3, 0.1, 0.25, 0.5]))
@settings(max_examples=25)
def test_fit_count_matches_schedule(p, target, step):
    target = min(target, p)
    r = np.random.default_rng(p * 31 + target)
    X = r.normal(size=(12, p))
    y = np.repeat([0, 1], 6)
    c = Counter()
    rfe(make_ds(X, y), SVC, target, step=step, fit=c)
    assert c.calls == rfe_schedule(p, target, step)


def test_rfecv_fit_count_closed_form(rng):
    X = rng.normal(size=(24, 12))
    y = np.repeat([0, 1, 2], 8)
    X[:, 0] += y
    ds = make_ds(X, y)
    c = Counter()
    res = rfecv(ds, SVC, k=3, step=0.2, seed=5, fit=c)
    n_star = optimal_size(res)
    expected = 3 * len(rfe_schedule(12, 1, 0.2)) + len(rfe_schedule(12, n_star, 0.2))
    assert len(c.calls) == expected == res.stages[0].n_fits


def test_rfe_matches_naive_oracle_path(rng):
    X = rng.normal(size=(40, 15))
    y = np.repeat([0, 1, 2, 3], 10)
    X[:, 3] += y
    X[:, 7] -= y
    ds = make_ds(X, y)

    def criterion(cols):
        return ranking_criterion(fit_arrays(SVC, ds.X[:, cols], ds.labels, 4)).tolist()

    path = naive_rfe_path(criterion, 15, 4, 0.25)
    res = rfe(ds, SVC, 4, step=0.25)
    assert res.final_selected == tuple(ds.feature_ids[j] for j in path[-1])
    # rank = number of rounds the feature was still alive after, counted from the end
    ranking = res.stages[0].ranking
    for r, (before, after) in enumerate(zip(path[:-1], path[1:])):
        for j in set(before) - set(after):
            assert ranking[j] == len(path) - r


def test_rfe_validation(rng):
    ds = two_informative()
    with pytest.raises(ConfigError):
        rfe(ds, SVC, 0, step=1)
    with pytest.raises(ConfigError):
        rfe(ds, SVC, 11, step=1)
    with pytest.raises(ConfigError):
        rfe(ds, ModelSpec("random_forest"), 2, step=1)
    with pytest.raises(ConfigError):
        rfecv(ds, ModelSpec("knn"))


# ---------------------------------------------------------------- selector oracles

def test_rfe_finds_exhaustive_best_pair():
    ds = two_informative()
    scores = {pair: cv_accuracy(ds, list(pair)) for pair in all_pairs(10)}
    best = max(scores.values())
    winners = {pair for pair, s in scores.items() if s == best}
    res = rfe(ds, SVC, 2, step=1)
    chosen = tuple(sorted(ds.matrix.feature_index(res.final_selected).tolist()))
    assert chosen in winners
    assert chosen == (0, 1)


def test_rfecv_single_feature(rng):
    X = rng.normal(size=(10, 1))
    y = np.repeat([0, 1], 5)
    res = rfecv(make_ds(X, y), SVC, k=2, step=1)
    st_ = res.stages[0]
    assert optimal_size(res) == 1
    assert list(st_.score_curve) == [1]


def test_rfecv_flat_curve_picks_smallest_size(rng):
    # every size separates perfectly, so the curve is flat at 1.0
    y = np.repeat([0, 1], 10)
    X = np.repeat(np.where(y == 1, 5.0, 0.0)[:, None], 4, axis=1) + rng.normal(0, 0.01, size=(20, 4))
    res = rfecv(make_ds(X, y), SVC, k=2, step=1)
    assert set(res.stages[0].score_curve.values()) == {1.0}
    assert optimal_size(res) == 1


def test_rfecv_prefers_few_features_on_sparse_signal():
    ds, mask = generate_synthetic(SyntheticSpec(120, 50, 5, 3, 3.0, 1.0, seed=11))
    res = rfecv(ds, SVC, k=2, step=1, seed=2)
    st_ = res.stages[0]
    n_star = optimal_size(res)
    assert n_star <= 15
    assert st_.score_curve[n_star] >= st_.score_curve[50]
    assert all(0.0 <= v <= 1.0 for v in st_.score_curve.values())
    # oracle: the curve equals direct retraining along independently recomputed elimination paths
    plan = stratified_kfold(ds.labels, 2, 2)
    direct = {}
    for tr, va in plan.folds():
        Xtr, ytr = ds.X[tr], ds.labels[tr]

        def criterion(cols):
            return ranking_criterion(fit_arrays(SVC, Xtr[:, cols], ytr, 3)).tolist()

        for cols in naive_rfe_path(criterion, 50, 1, 1):
            m = fit_arrays(SVC, Xtr[:, cols], ytr, 3)
            direct.setdefault(len(cols), []).append(np.mean(predict(m, ds.X[va][:, cols]) == ds.labels[va]))
    for size, accs in direct.items():
        assert st_.score_curve[size] == pytest.approx(np.mean(accs), abs=1e-12)


def test_rfecv_is_deterministic():
    ds = two_informative(4)
    a = rfecv(ds, SVC, k=2, step=0.2, seed=9).to_dict(timing=False)
    b = rfecv(ds, SVC, k=2, step=0.2, seed=9).to_dict(timing=False)
    assert a == b


# ---------------------------------------------------------------- tree stage

def test_tree_select_one_hot():
    X = np.full((20, 6), 2.0)
    y = np.repeat([0, 1], 10)
    X[:, 4] = np.r_[np.zeros(10), np.ones(10)]
    res = tree_select(make_ds(X, y), SelectorConfig(seed=1))
    assert res.final_selected == ("f4",)
    assert res.stages[0].ranking[4] == 1


def test_tree_select_equal_importances_fall_back_to_lowest_index():
    X = np.ones((10, 4))
    y = np.repeat([0, 1], 5)
    res = tree_select(make_ds(X, y), SelectorConfig(seed=1))
    assert np.all(res.stages[0].scores == 0)
    assert res.final_selected == ("f0",)


def test_tree_select_recovers_informative_features():
    ds, mask = generate_synthetic(SyntheticSpec(200, 500, 20, 4, 3.0, 1.0, seed=3))
    res = tree_select(ds, SelectorConfig(seed=5))
    sel = ds.matrix.feature_index(res.final_selected)
    assert mask[sel].sum() >= 14
    imp = res.stages[0].scores
    # every selected feature is above the mean; nothing else is
    assert np.all(imp[sel] > imp.mean())
    assert np.sum(imp > imp.mean()) == sel.size


@pytest.mark.parametrize("rule, n", [("median", 3), ("top_fraction:0.25", 2), ("top_fraction:1", 8)])
def test_tree_select_rules(rule, n, rng):
    X = rng.normal(size=(40, 8))
    y = np.repeat([0, 1], 20)
    X[:, :3] += y[:, None] * 2
    res = tree_select(make_ds(X, y), SelectorConfig(importance_threshold_rule=rule, seed=2))
    if rule == "median":
        imp = res.stages[0].scores
        assert len(res.final_selected) == np.sum(imp > np.median(imp))
    else:
        assert len(res.final_selected) == n


def test_tree_select_needs_two_features():
    with pytest.raises(DataError):
        tree_select(make_ds(np.arange(6.0)[:, None], [0, 0, 0, 1, 1, 1]))


def test_selector_config_validation():
    with pytest.raises(ConfigError):
        SelectorConfig(importance_threshold_rule="max")
    with pytest.raises(ConfigError):
        SelectorConfig(importance_threshold_rule="top_fraction:2")
    with pytest.raises(ConfigError):
        SelectorConfig(rfe_step=0)
    with pytest.raises(ConfigError):
        SelectorConfig(rfecv_k=1)
    with pytest.raises(ConfigError):
        SelectorConfig(estimator_spec=ModelSpec("knn"))
    with pytest.raises(ConfigError):
        SelectorConfig(rfe_target=0)
    assert SelectorConfig(rfe_target=5.0).rfe_target == 5


# ---------------------------------------------------------------- invariants

def test_ranking_follows_column_permutation(rng):
    X = rng.normal(size=(36, 9))
    y = np.repeat([0, 1, 2], 12)
    X[:, 2] += y
    X[:, 5] -= 0.5 * y
    perm = rng.permutation(9)
    a = rfe(make_ds(X, y), SVC, 2, step=1).stages[0].ranking
    b = rfe(make_ds(X[:, perm], y), SVC, 2, step=1).stages[0].ranking
    assert np.array_equal(b, a[perm])


@given(st.integers(0, 10**6), st.integers(1, 7))
@settings(max_examples=15)
def test_step_one_survivors_are_top_ranked(seed, k):
    r = np.random.default_rng(seed)
    X = r.normal(size=(20, 8))
    y = np.repeat([0, 1], 10)
    X[:, 0] += y
    ds = make_ds(X, y)
    full = rfe(ds, SVC, 1, step=1).stages[0].ranking
    part = rfe(ds, SVC, k, step=1)
    assert set(ds.matrix.feature_index(part.final_selected)) == set(np.flatnonzero(full <= k))


def test_composition_identity():
    ds, _ = generate_synthetic(SyntheticSpec(60, 30, 4, 2, 3.0, 1.0, seed=7))
    cfg = SelectorConfig(importance_threshold_rule="top_fraction:1", rfe_step=0.2, seed=13)
    combined = sequential_select(ds, cfg)
    assert combined.stages[0].selected_ids == ds.feature_ids
    alone = rfecv(ds, cfg.estimator_spec, cfg.rfecv_k, cfg.rfe_step, derive_seed(cfg.seed, "rfecv"))
    s2 = combined.stages[1]
    assert s2.selected_ids == alone.final_selected
    assert np.array_equal(s2.ranking, alone.stages[0].ranking)
    assert s2.score_curve == alone.stages[0].score_curve
    third = rfe(ds.select_features(s2.selected_ids), cfg.estimator_spec, len(s2.selected_ids), cfg.rfe_step)
    assert combined.final_selected == third.final_selected


def test_sequential_stage_order_and_monotone_counts():
    ds, _ = generate_synthetic(SyntheticSpec(60, 40, 5, 3, 3.0, 1.0, seed=2))
    res = sequential_select(ds, SelectorConfig(seed=4))
    assert [s.name for s in res.stages] == ["tree_based", "rfecv", "rfe"]
    counts = [len(ds.feature_ids)] + [len(s.selected_ids) for s in res.stages]
    assert counts == sorted(counts, reverse=True)
    assert res.wall_time_seconds == pytest.approx(sum(s.wall_time_seconds for s in res.stages))


def test_sequential_with_integer_target_and_reuse():
    ds, _ = generate_synthetic(SyntheticSpec(60, 40, 5, 3, 3.0, 1.0, seed=2))
    two = sequential_select(ds, SelectorConfig(seed=4, reuse_rfecv_survivors=True))
    assert [s.name for s in two.stages] == ["tree_based", "rfecv"]
    tgt = sequential_select(ds, SelectorConfig(seed=4, rfe_target=1))
    assert len(tgt.final_selected) == 1
    with pytest.raises(ConfigError):
        sequential_select(ds, SelectorConfig(seed=4, rfe_target=40))


def test_selection_result_rejects_broken_nesting():
    a = Stage("a", ("x", "y"), ("x",), np.array([1, 2]), 0.1)
    with pytest.raises(ValueError):
        SelectionResult((Stage("a", ("x",), ("z",), np.array([1]), 0.1),))
    with pytest.raises(ValueError):
        SelectionResult((a, Stage("b", ("y",), ("y",), np.array([1]), 0.1)))
    with pytest.raises(ValueError):
        SelectionResult((Stage("a", ("x",), ("x",), np.array([1]), -1.0),))
    with pytest.raises(ValueError):
        SelectionResult(())


def test_run_strategy_dispatch():
    ds, _ = generate_synthetic(SyntheticSpec(40, 20, 3, 2, 3.0, 1.0, seed=1))
    cfg = SelectorConfig(seed=1)
    assert [s.name for s in run_strategy("tree", ds, cfg).stages] == ["tree_based"]
    assert len(run_strategy("rfe", ds, cfg).final_selected) == 10
    assert len(run_strategy("rfe", ds, cfg, rfe_target=3).final_selected) == 3
    assert [s.name for s in run_strategy("rfecv", ds, cfg).stages] == ["rfecv"]
    with pytest.raises(ConfigError):
        run_strategy("lasso", ds, cfg)


def test_to_dict_timing_switch():
    ds = two_informative()
    d = rfe(ds, SVC, 5, step=1).to_dict(timing=False)
    assert "wall_time_seconds" not in d and "wall_time_seconds" not in d["stages"][0]
    assert d["final_selected"] == d["stages"][0]["selected_feature_ids"]
    assert "wall_time_seconds" in rfe(ds, SVC, 5, step=1).to_dict()
