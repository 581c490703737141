"""Six-family baseline and the four-strategy selection benchmark."""

from __future__ import annotations

import datetime
import platform
import socket
from dataclasses import dataclass, field

import numpy as np

from .classifiers import FAMILIES, ModelSpec, fit_arrays, predict, train
from .config import RunConfig
from .dataset import LabeledDataset, stratified_split
from .evaluation import EvaluationReport, evaluate
from .selection import run_strategy

TIMING_NOTE = ("wall_time_seconds covers feature selection only; final-classifier training and file I/O "
               "are excluded; metrics are macro-averaged")

# report row name for each strategy
ROW_NAMES = {"tree": "tree_based", "rfecv": "rfecv", "rfe": "rfe", "combined": "combined"}


def split(cfg: RunConfig, ds: LabeledDataset):
    return stratified_split(ds, cfg.test_fraction, cfg.split_seed())


# ---------------------------------------------------------------- baseline

@dataclass(frozen=True)
class BaselineRow:
    family: str
    train_accuracy: float
    test_accuracy: float
    spec: ModelSpec


def run_baseline(cfg: RunConfig, ds: LabeledDataset):
    """Train every family with its default spec on one split; train/test accuracy per family."""
    tr, te = split(cfg, ds)
    rows = []
    for family in FAMILIES:
        spec = cfg.model_spec(family, f"baseline/{family}")
        model = train(spec, tr)
        rows.append(BaselineRow(
            family,
            float(np.mean(predict(model, tr.X) == tr.labels)),
            float(np.mean(predict(model, te.X) == te.labels)),
            spec,
        ))
    return rows


# ---------------------------------------------------------------- benchmark

@dataclass
class BenchRow:
    strategy: str
    wall_time_seconds: float = 0.0
    n_selected: int = 0
    stage_times: dict = field(default_factory=dict)
    selected_ids: tuple = ()
    report: EvaluationReport = None
    error: str = None

    def to_dict(self, class_names, timing=True):
        d = {
            "strategy": self.strategy,
            "n_selected": self.n_selected,
            "selected_feature_ids": list(self.selected_ids),
            "metrics": self.report.to_dict(class_names) if self.report is not None else None,
            "error": self.error,
        }
        if timing:
            d["wall_time_seconds"] = self.wall_time_seconds
            d["stage_wall_time_seconds"] = dict(self.stage_times)
        return d


@dataclass
class BenchReport:
    dataset: str
    rows: list
    class_names: tuple
    n_train: int
    n_test: int
    n_features: int
    environment: dict = field(default_factory=dict)

    def row(self, strategy) -> BenchRow:
        name = ROW_NAMES.get(strategy, strategy)
        return next(r for r in self.rows if r.strategy == name)

    def to_dict(self, timing=True):
        d = {
            "dataset": self.dataset,
            "note": TIMING_NOTE,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_features": self.n_features,
            "rows": [r.to_dict(self.class_names, timing) for r in self.rows],
        }
        if timing:
            d["environment"] = dict(self.environment)
        return d

    def csv_rows(self, timing=True):
        header = ["strategy", "n_selected", "accuracy", "accuracy_percent", "macro_precision", "macro_recall",
                  "macro_specificity", "macro_f1", "g_mean", "error"]
        if timing:
            header.insert(1, "wall_time_seconds")
        rows = []
        for r in self.rows:
            m = r.report
            vals = [r.strategy, r.n_selected]
            if m is None:
                vals += [""] * 7
            else:
                vals += [repr(m.accuracy), m.accuracy_percent, repr(m.macro_precision), repr(m.macro_recall),
                         repr(m.macro_specificity), repr(m.macro_f1), repr(m.g_mean)]
            vals.append(r.error or "")
            if timing:
                vals.insert(1, repr(r.wall_time_seconds))
            rows.append(vals)
        return header, rows


def environment_note():
    return {
        "host": socket.gethostname(),
        "date": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
    }


def warm_up():
    """Compile the numba kernels so that no strategy pays for JIT compilation."""
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 3))
    y = np.arange(12) % 3
    fit_arrays(ModelSpec("linear_svc"), X, y, 3)
    fit_arrays(ModelSpec("linear_svc"), X, y % 2, 2)
    fit_arrays(ModelSpec("random_forest", {"n_trees": 2}), X, y, 3)


def run_benchmark(cfg: RunConfig, ds: LabeledDataset, dataset_name: str = "dataset",
                  strategies=("tree", "rfecv", "rfe", "combined")) -> BenchReport:
    """Selection on the train split, final linear SVC on the selected train columns, test metrics.

    The standalone RFE target is `bench_rfe_target`; "auto" uses the combined
    strategy's final count (half the features if combined is not run or fails),
    so combined runs before rfe. Rows keep the order of `strategies`. A
    failing strategy records its error in its row.
    """
    warm_up()
    tr, te = split(cfg, ds)
    scfg = cfg.selector_config()
    final_spec = cfg.model_spec("linear_svc", "final_classifier")
    order = sorted(strategies, key=lambda s: s == "rfe")
    rows = {}
    for strategy in order:
        row = BenchRow(ROW_NAMES[strategy])
        try:
            target = None
            if strategy == "rfe":
                target = cfg.bench_rfe_target
                if target == "auto":
                    comb = rows.get("combined")
                    target = comb.n_selected if comb is not None and comb.error is None else None
            result = run_strategy(strategy, tr, scfg, rfe_target=target)
            row.stage_times = {s.name: s.wall_time_seconds for s in result.stages}
            row.wall_time_seconds = result.wall_time_seconds
            row.selected_ids = tuple(result.final_selected)
            row.n_selected = len(row.selected_ids)
            model = train(final_spec, tr.select_features(row.selected_ids))
            y_hat = predict(model, te.select_features(row.selected_ids).X)
            row.report = evaluate(te.labels, y_hat, ds.n_classes)
        except Exception as exc:  # recorded per row; other strategies still run
            row.error = f"{type(exc).__name__}: {exc}"
        rows[strategy] = row
    return BenchReport(dataset_name, [rows[s] for s in strategies], ds.class_names,
                       tr.matrix.n_samples, te.matrix.n_samples, ds.matrix.n_features, environment_note())
