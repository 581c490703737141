"""Confusion-matrix metrics and cross-validated grid search.

All multiclass averages are macro (unweighted over classes). A metric whose
denominator is zero is reported as 0 and listed in `zero_division`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import ModelSpec, fit_arrays, predict
from .dataset import LabeledDataset, stratified_kfold
from .errors import ConfigError, DataError

AVERAGING = "macro"


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j] = samples of true class i predicted as class j."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise DataError("confusion matrix must be square with at least one class")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(c == np.round(c)):
                raise DataError("confusion counts must be integers")
            c = c.astype(np.int64)
        if (c < 0).any():
            raise DataError("confusion counts must be non-negative")
        c = c.astype(np.int64, copy=True)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def n_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    def one_vs_rest(self):
        """Per-class (TP, FP, FN, TN) arrays."""
        c = self.counts
        tp = np.diag(c).copy()
        fp = c.sum(axis=0) - tp
        fn = c.sum(axis=1) - tp
        tn = c.sum() - tp - fp - fn
        return tp, fp, fn, tn


def confusion_matrix(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise DataError(f"y_true and y_pred lengths differ ({y_true.shape} vs {y_pred.shape})")
    if n_classes < 1:
        raise DataError("n_classes must be >= 1")
    for name, v in (("y_true", y_true), ("y_pred", y_pred)):
        if v.size and (not np.all(v == np.round(v)) or v.min() < 0 or v.max() >= n_classes):
            raise DataError(f"{name} holds labels outside 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true.astype(int), y_pred.astype(int)), 1)
    return ConfusionMatrix(counts)


def _ratio(num, den):
    den = np.asarray(den, dtype=float)
    out = np.zeros(den.shape)
    ok = den > 0
    out[ok] = np.asarray(num, dtype=float)[ok] / den[ok]
    return out, ~ok


@dataclass(frozen=True)
class EvaluationReport:
    precision: np.ndarray
    recall: np.ndarray
    specificity: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_specificity: float
    macro_f1: float
    g_mean: float
    accuracy: float
    support: np.ndarray
    zero_division: tuple = field(default=())

    @property
    def accuracy_percent(self) -> str:
        return f"{100.0 * self.accuracy:.1f}"

    def to_dict(self, class_names=None):
        k = self.precision.size
        names = list(class_names) if class_names is not None else [str(c) for c in range(k)]
        return {
            "averaging": AVERAGING,
            "accuracy": float(self.accuracy),
            "accuracy_percent": self.accuracy_percent,
            "macro": {
                "precision": float(self.macro_precision),
                "recall": float(self.macro_recall),
                "specificity": float(self.macro_specificity),
                "f1": float(self.macro_f1),
                "g_mean": float(self.g_mean),
            },
            "per_class": [
                {
                    "class": names[c],
                    "support": int(self.support[c]),
                    "precision": float(self.precision[c]),
                    "recall": float(self.recall[c]),
                    "specificity": float(self.specificity[c]),
                    "f1": float(self.f1[c]),
                }
                for c in range(k)
            ],
            "zero_division": [f"{names[c]}:{metric}" for c, metric in self.zero_division],
        }

    def csv_rows(self, class_names=None):
        """(header, rows) with one row per class plus a macro row."""
        k = self.precision.size
        names = list(class_names) if class_names is not None else [str(c) for c in range(k)]
        header = ["class", "support", "precision", "recall", "specificity", "f1"]
        rows = [[names[c], int(self.support[c]), repr(float(self.precision[c])), repr(float(self.recall[c])),
                 repr(float(self.specificity[c])), repr(float(self.f1[c]))] for c in range(k)]
        rows.append(["macro", int(self.support.sum()), repr(float(self.macro_precision)),
                     repr(float(self.macro_recall)), repr(float(self.macro_specificity)),
                     repr(float(self.macro_f1))])
        return header, rows


def metrics_report(cm: ConfusionMatrix) -> EvaluationReport:
    """One-vs-rest precision, recall, specificity and F1 per class, plus macro means.

    g_mean is sqrt(macro recall * macro specificity).
    """
    if cm.total == 0:
        raise DataError("cannot score an empty confusion matrix")
    tp, fp, fn, tn = cm.one_vs_rest()
    precision, z_p = _ratio(tp, tp + fp)
    recall, z_r = _ratio(tp, tp + fn)
    specificity, z_s = _ratio(tn, tn + fp)
    f1, z_f = _ratio(2.0 * precision * recall, precision + recall)
    flags = []
    for c in range(cm.n_classes):
        for metric, z in (("precision", z_p), ("recall", z_r), ("specificity", z_s), ("f1", z_f)):
            if z[c]:
                flags.append((c, metric))
    macro_r = float(recall.mean())
    macro_s = float(specificity.mean())
    return EvaluationReport(
        precision=precision,
        recall=recall,
        specificity=specificity,
        f1=f1,
        macro_precision=float(precision.mean()),
        macro_recall=macro_r,
        macro_specificity=macro_s,
        macro_f1=float(f1.mean()),
        g_mean=math.sqrt(macro_r * macro_s),
        accuracy=float(np.trace(cm.counts)) / cm.total,
        support=cm.counts.sum(axis=1),
        zero_division=tuple(flags),
    )


def evaluate(y_true, y_pred, n_classes: int) -> EvaluationReport:
    return metrics_report(confusion_matrix(y_true, y_pred, n_classes))


# ---------------------------------------------------------------- grid search

@dataclass(frozen=True)
class GridRow:
    params: dict
    mean_accuracy: float
    fold_accuracies: tuple


def grid_points(grid: dict):
    """Cartesian product in declared key order, values in declared list order."""
    if not grid:
        raise ConfigError("grid must name at least one hyperparameter")
    keys = list(grid)
    for key in keys:
        if len(grid[key]) == 0:
            raise ConfigError(f"grid entry {key!r} has no values")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[key] for key in keys))]


def grid_search(ds: LabeledDataset, family: str, grid: dict, k: int = 5, seed: int = 0, fit=fit_arrays):
    """Stratified k-fold accuracy for every grid point; returns (best_params, cv_table).

    Every fold trains a fresh model. The best point has the highest mean
    accuracy; ties go to the earliest point in enumeration order. All points
    share one fold plan.
    """
    points = grid_points(grid)
    specs = [ModelSpec(family, params, seed) for params in points]  # validates every value up front
    plan = stratified_kfold(ds.labels, k, seed)
    folds = list(plan.folds())
    table = []
    for params, spec in zip(points, specs):
        accs = []
        for tr, va in folds:
            model = fit(spec, ds.X[tr], ds.labels[tr], ds.n_classes)
            accs.append(float(np.mean(predict(model, ds.X[va]) == ds.labels[va])))
        typed = {key: spec.hyperparams[key] for key in params}
        table.append(GridRow(typed, float(np.mean(accs)), tuple(accs)))
    best = 0
    for i, row in enumerate(table):
        if row.mean_accuracy > table[best].mean_accuracy:
            best = i
    return dict(table[best].params), table
