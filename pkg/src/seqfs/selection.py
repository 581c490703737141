"""Feature selectors and their sequential composition.

Three selectors are provided:

* :func:`tree_select` keeps features whose random-forest impurity importance
  exceeds a threshold (the mean importance by default);
* :func:`rfe` repeatedly fits a linear model and drops the features with the
  smallest summed squared weights until a target count is left;
* :func:`rfecv` runs the same elimination schedule inside stratified k-fold
  cross-validation to pick the target count, then runs :func:`rfe` with it.

:func:`sequential_select` chains them: tree stage, then RFECV on the
survivors, then RFE on the RFECV survivors.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .classifiers import LINEAR_FAMILIES, ModelSpec, fit_arrays, impurity_importances, predict, ranking_criterion
from .dataset import LabeledDataset, stratified_kfold
from .errors import ConfigError, DataError
from .seeding import derive_seed

FROM_RFECV = "from_rfecv"


@dataclass(frozen=True)
class Stage:
    name: str
    input_ids: tuple
    selected_ids: tuple
    ranking: np.ndarray
    wall_time_seconds: float
    score_curve: Optional[dict] = None
    scores: Optional[np.ndarray] = None
    n_fits: int = 0
    fold_scores: Optional[np.ndarray] = None

    def to_dict(self, timing=True):
        d = {
            "stage": self.name,
            "input_feature_ids": list(self.input_ids),
            "selected_feature_ids": list(self.selected_ids),
            "ranking": [int(r) for r in self.ranking],
            "n_estimator_fits": self.n_fits,
        }
        if self.scores is not None:
            d["scores"] = [float(s) for s in self.scores]
        if self.score_curve is not None:
            d["score_curve"] = [
                {"n_features": int(n), "mean_cv_accuracy": float(a)} for n, a in sorted(self.score_curve.items())
            ]
        if timing:
            d["wall_time_seconds"] = self.wall_time_seconds
        return d


@dataclass(frozen=True)
class SelectionResult:
    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ValueError("a selection result needs at least one stage")
        for i, st in enumerate(stages):
            if not set(st.selected_ids) <= set(st.input_ids):
                raise ValueError(f"stage {st.name!r} selected features outside its input")
            if st.wall_time_seconds < 0:
                raise ValueError("negative wall time")
            if i and tuple(st.input_ids) != tuple(stages[i - 1].selected_ids):
                raise ValueError(f"stage {st.name!r} input differs from previous stage output")

    @property
    def final_selected(self) -> tuple:
        return self.stages[-1].selected_ids

    @property
    def wall_time_seconds(self) -> float:
        return sum(s.wall_time_seconds for s in self.stages)

    def stage(self, name) -> Stage:
        return next(s for s in self.stages if s.name == name)

    def to_dict(self, timing=True):
        d = {
            "stages": [s.to_dict(timing) for s in self.stages],
            "final_selected": list(self.final_selected),
        }
        if timing:
            d["wall_time_seconds"] = self.wall_time_seconds
        return d


def _check_step(step):
    if isinstance(step, bool):
        raise ConfigError(f"invalid step {step!r}")
    if isinstance(step, float) and 0 < step < 1:
        return step
    if float(step) == int(step) and int(step) >= 1:
        return int(step)
    raise ConfigError(f"step must be a positive integer or a fraction in (0, 1), got {step!r}")


def _parse_rule(rule):
    if rule in ("mean", "median"):
        return rule, None
    if isinstance(rule, str) and rule.startswith("top_fraction"):
        try:
            frac = float(rule.split(":", 1)[1])
        except (IndexError, ValueError):
            raise ConfigError(f"top_fraction rule needs a value, e.g. 'top_fraction:0.1', got {rule!r}") from None
        if not 0 < frac <= 1:
            raise ConfigError(f"top_fraction must lie in (0, 1], got {frac}")
        return "top_fraction", frac
    raise ConfigError(f"unknown importance threshold rule {rule!r}")


@dataclass(frozen=True)
class SelectorConfig:
    tree_spec: ModelSpec = None
    importance_threshold_rule: str = "mean"
    estimator_spec: ModelSpec = None
    rfe_step: Union[int, float] = 0.1
    rfecv_k: int = 2
    rfecv_min_features: int = 1
    rfe_target: Union[int, str] = FROM_RFECV
    reuse_rfecv_survivors: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.tree_spec is None:
            object.__setattr__(self, "tree_spec", ModelSpec("random_forest", seed=derive_seed(self.seed, "tree_select")))
        if self.estimator_spec is None:
            object.__setattr__(self, "estimator_spec", ModelSpec("linear_svc", seed=derive_seed(self.seed, "estimator")))
        if self.tree_spec.family not in ("random_forest", "decision_tree"):
            raise ConfigError("tree_spec must be a random_forest (or decision_tree) spec")
        if self.estimator_spec.family not in LINEAR_FAMILIES:
            raise ConfigError("estimator_spec must be a linear model spec")
        _parse_rule(self.importance_threshold_rule)
        object.__setattr__(self, "rfe_step", _check_step(self.rfe_step))
        if int(self.rfecv_k) < 2:
            raise ConfigError("rfecv_k must be >= 2")
        if int(self.rfecv_min_features) < 1:
            raise ConfigError("rfecv_min_features must be >= 1")
        if self.rfe_target != FROM_RFECV:
            t = int(self.rfe_target)
            if t < 1 or t != float(self.rfe_target):
                raise ConfigError(f"rfe_target must be a positive integer or {FROM_RFECV!r}")
            object.__setattr__(self, "rfe_target", t)


# ---------------------------------------------------------------- tree stage

def _importance_selection(imp, rule):
    kind, frac = _parse_rule(rule)
    n = imp.size
    if kind == "top_fraction":
        n_keep = max(1, math.ceil(frac * n))
        order = np.lexsort((np.arange(n), -imp))
        keep = np.zeros(n, dtype=bool)
        keep[order[:n_keep]] = True
        return keep
    cut = imp.mean() if kind == "mean" else np.median(imp)
    keep = imp > cut
    if not keep.any():
        keep[int(np.argmax(imp))] = True
    return keep


def tree_select(ds: LabeledDataset, cfg: SelectorConfig = None, fit: Callable = fit_arrays) -> SelectionResult:
    """Keep features whose forest importance is strictly above the rule's cutoff.

    If nothing clears the cutoff the single most important feature is kept
    (lowest index on ties).
    """
    cfg = cfg or SelectorConfig()
    if ds.matrix.n_features < 2:
        raise DataError("tree selection needs at least 2 features")
    t0 = time.perf_counter()
    model = fit(cfg.tree_spec, ds.X, ds.labels, ds.n_classes)
    imp = impurity_importances(model)
    keep = _importance_selection(imp, cfg.importance_threshold_rule)
    elapsed = time.perf_counter() - t0

    ranking = np.ones(imp.size, dtype=int)
    rest = np.flatnonzero(~keep)
    rest = rest[np.lexsort((rest, -imp[rest]))]
    ranking[rest] = 2 + np.arange(rest.size)
    ids = ds.feature_ids
    stage = Stage("tree_based", ids, tuple(ids[j] for j in np.flatnonzero(keep)), ranking,
                  elapsed, scores=imp, n_fits=1)
    return SelectionResult((stage,))


# ---------------------------------------------------------------- RFE

def _n_eliminate(step, n_left):
    if isinstance(step, float):
        return max(1, math.ceil(step * n_left))
    return step


def rfe_schedule(n_features: int, n_target: int, step) -> list:
    """Feature counts at which the estimator is fitted, ending with the final fit."""
    step = _check_step(step)
    if not 1 <= n_target <= n_features:
        raise ConfigError(f"target {n_target} outside [1, {n_features}]")
    sizes = []
    n = n_features
    while n > n_target:
        sizes.append(n)
        n -= min(_n_eliminate(step, n), n - n_target)
    sizes.append(n)
    return sizes


def _eliminate(X, y, n_classes, spec, n_target, step, fit, on_fit=None):
    """Core elimination loop. Returns (ranking, surviving column indices).

    `on_fit(model, columns)` is called after every fit, including the final
    one on the survivors.
    """
    p = X.shape[1]
    alive = np.arange(p)
    eliminated_round = np.full(p, -1)
    rnd = 0
    while True:
        model = fit(spec, X[:, alive], y, n_classes)
        if on_fit is not None:
            on_fit(model, alive)
        if alive.size <= n_target:
            break
        crit = ranking_criterion(model)
        n_drop = min(_n_eliminate(step, alive.size), alive.size - n_target)
        # lowest criterion first; among equals the higher column index goes first
        order = np.lexsort((-alive, crit))
        drop = order[:n_drop]
        eliminated_round[alive[drop]] = rnd
        alive = np.delete(alive, drop)
        rnd += 1
    ranking = np.ones(p, dtype=int)
    gone = eliminated_round >= 0
    ranking[gone] = 1 + rnd - eliminated_round[gone]
    return ranking, np.sort(alive)


def _check_estimator(spec):
    if spec.family not in LINEAR_FAMILIES:
        raise ConfigError(f"RFE needs a linear estimator, not {spec.family}")


def rfe(ds: LabeledDataset, estimator_spec: ModelSpec, n_target: int, step=0.1,
        fit: Callable = fit_arrays) -> SelectionResult:
    """Recursive feature elimination down to `n_target` features.

    Ranking: survivors get 1, the last batch eliminated 2, and so on.
    """
    _check_estimator(estimator_spec)
    step = _check_step(step)
    p = ds.matrix.n_features
    if not 1 <= int(n_target) <= p:
        raise ConfigError(f"n_target {n_target} outside [1, {p}]")
    n_fits = 0

    def count(model, cols):
        nonlocal n_fits
        n_fits += 1

    t0 = time.perf_counter()
    ranking, alive = _eliminate(ds.X, ds.labels, ds.n_classes, estimator_spec, int(n_target), step, fit, count)
    elapsed = time.perf_counter() - t0
    ids = ds.feature_ids
    stage = Stage("rfe", ids, tuple(ids[j] for j in alive), ranking, elapsed, n_fits=n_fits)
    return SelectionResult((stage,))


def rfecv(ds: LabeledDataset, estimator_spec: ModelSpec, k: int = 2, step=0.1, seed: int = 0,
          min_features: int = 1, fit: Callable = fit_arrays) -> SelectionResult:
    """RFE with the target count chosen by stratified k-fold accuracy.

    Every fold runs the elimination schedule down to `min_features` on its
    training part and scores the validation part at each visited size. The
    chosen size is the smallest one attaining the best mean accuracy; the
    returned stage is an RFE on the whole dataset at that size.
    """
    _check_estimator(estimator_spec)
    step = _check_step(step)
    p = ds.matrix.n_features
    min_features = min(int(min_features), p)
    t0 = time.perf_counter()
    plan = stratified_kfold(ds.labels, k, seed)
    sizes = rfe_schedule(p, min_features, step)
    col = {s: i for i, s in enumerate(sizes)}
    fold_scores = np.zeros((k, len(sizes)))
    n_fits = 0
    for f, (tr, va) in enumerate(plan.folds()):
        Xva, yva = ds.X[va], ds.labels[va]

        def score(model, cols, f=f, Xva=Xva, yva=yva):
            nonlocal n_fits
            n_fits += 1
            fold_scores[f, col[cols.size]] = np.mean(predict(model, Xva[:, cols]) == yva)

        _eliminate(ds.X[tr], ds.labels[tr], ds.n_classes, estimator_spec, min_features, step, fit, score)

    mean = fold_scores.mean(axis=0)
    best = mean.max()
    n_best = min(s for s, m in zip(sizes, mean) if m == best)
    final = rfe(ds, estimator_spec, n_best, step, fit=fit).stages[0]
    elapsed = time.perf_counter() - t0
    stage = replace(
        final, name="rfecv", wall_time_seconds=elapsed, n_fits=n_fits + final.n_fits,
        score_curve={int(s): float(m) for s, m in zip(sizes, mean)}, fold_scores=fold_scores,
    )
    return SelectionResult((stage,))


def optimal_size(result: SelectionResult) -> int:
    """Feature count picked by an RFECV stage."""
    return len(result.stage("rfecv").selected_ids)


# ---------------------------------------------------------------- cascade

def sequential_select(ds: LabeledDataset, cfg: SelectorConfig = None, fit: Callable = fit_arrays) -> SelectionResult:
    """Tree stage, then RFECV on its survivors, then RFE on the RFECV survivors.

    With rfe_target=from_rfecv the last stage re-runs RFE at the RFECV size,
    which confirms the selection and yields the final ranking; set
    reuse_rfecv_survivors to stop after RFECV instead.
    """
    cfg = cfg or SelectorConfig()
    s1 = tree_select(ds, cfg, fit=fit).stages[0]
    ds1 = ds.select_features(s1.selected_ids)
    s2 = rfecv(ds1, cfg.estimator_spec, cfg.rfecv_k, cfg.rfe_step, derive_seed(cfg.seed, "rfecv"),
               cfg.rfecv_min_features, fit=fit).stages[0]
    if cfg.reuse_rfecv_survivors:
        return SelectionResult((s1, s2))
    ds2 = ds1.select_features(s2.selected_ids)
    target = len(s2.selected_ids) if cfg.rfe_target == FROM_RFECV else cfg.rfe_target
    if target > len(s2.selected_ids):
        raise ConfigError(f"rfe_target {target} exceeds the {len(s2.selected_ids)} features left after RFECV")
    s3 = rfe(ds2, cfg.estimator_spec, target, cfg.rfe_step, fit=fit).stages[0]
    return SelectionResult((s1, s2, s3))


STRATEGIES = ("tree", "rfecv", "rfe", "combined")


def run_strategy(strategy: str, ds: LabeledDataset, cfg: SelectorConfig, rfe_target: int = None,
                 fit: Callable = fit_arrays) -> SelectionResult:
    """One of the four strategies on `ds`.

    A standalone RFE needs an explicit count: `rfe_target` if given, else the
    config's integer target, else half the features.
    """
    if strategy == "tree":
        return tree_select(ds, cfg, fit=fit)
    if strategy == "rfecv":
        return rfecv(ds, cfg.estimator_spec, cfg.rfecv_k, cfg.rfe_step, derive_seed(cfg.seed, "rfecv"),
                     cfg.rfecv_min_features, fit=fit)
    if strategy == "rfe":
        if rfe_target is None:
            rfe_target = cfg.rfe_target if cfg.rfe_target != FROM_RFECV else max(1, ds.matrix.n_features // 2)
        return rfe(ds, cfg.estimator_spec, min(rfe_target, ds.matrix.n_features), cfg.rfe_step, fit=fit)
    if strategy == "combined":
        return sequential_select(ds, cfg, fit=fit)
    raise ConfigError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
