"""The six baseline model families behind one train/predict contract."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..dataset import ExpressionMatrix, LabeledDataset
from ..errors import ConfigError, DataError
from ..io import atomic_write_text, dumps_json
from .knn import KNeighbors
from .linear import LinearSVC, LogisticRegression, decide, fit_hinge, hinge_primal, logistic_objective
from .naive_bayes import GaussianNB
from .tree import DecisionTree, RandomForest

FAMILIES = (
    "decision_tree",
    "random_forest",
    "knn",
    "gaussian_nb",
    "logistic_regression",
    "linear_svc",
)
LINEAR_FAMILIES = ("linear_svc", "logistic_regression")
MODEL_FORMAT_VERSION = 1


class ConvergenceWarning(UserWarning):
    pass


def _as_bool(v):
    if isinstance(v, str):
        low = v.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(v)
    return bool(v)


def _pos_int(v):
    if isinstance(v, bool):
        raise ValueError(v)
    f = float(v)
    if f != int(f) or f < 1:
        raise ValueError(v)
    return int(f)


def _opt_pos_int(v):
    if v is None or (isinstance(v, str) and v.strip().lower() in ("none", "")):
        return None
    return _pos_int(v)


def _pos_float(v):
    f = float(v)
    if not (f > 0 and math.isfinite(f)):
        raise ValueError(v)
    return f


def _nonneg_float(v):
    f = float(v)
    if not (f >= 0 and math.isfinite(f)):
        raise ValueError(v)
    return f


def _choice(*options):
    def check(v):
        if v not in options:
            raise ValueError(v)
        return v
    return check


def _max_features(v):
    if v in ("sqrt", "log2", "all"):
        return v
    if isinstance(v, str):
        v = float(v)
    if isinstance(v, float) and 0 < v < 1:
        return v
    return _pos_int(v)


_SCHEMA = {
    "decision_tree": {"max_depth": (None, _opt_pos_int), "min_samples_leaf": (1, _pos_int)},
    "random_forest": {
        "n_trees": (100, _pos_int),
        "max_features": ("sqrt", _max_features),
        "bootstrap": (True, _as_bool),
        "max_depth": (None, _opt_pos_int),
        "min_samples_leaf": (1, _pos_int),
    },
    "knn": {"k": (5, _pos_int), "metric": ("euclidean", _choice("euclidean", "manhattan"))},
    "gaussian_nb": {"var_smoothing": (1e-9, _nonneg_float)},
    "logistic_regression": {
        "l2_strength": (1.0, _pos_float),
        "max_iters": (1000, _pos_int),
        "tol": (1e-4, _pos_float),
    },
    "linear_svc": {"C": (1.0, _pos_float), "max_iters": (1000, _pos_int), "tol": (1e-4, _pos_float)},
}


def default_hyperparams(family):
    return {k: d for k, (d, _) in _SCHEMA[family].items()}


@dataclass(frozen=True)
class ModelSpec:
    """Model family, hyperparameters (missing keys take defaults) and seed."""

    family: str
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in _SCHEMA:
            raise ConfigError(f"unknown model family {self.family!r}; choose from {', '.join(FAMILIES)}")
        schema = _SCHEMA[self.family]
        unknown = set(self.hyperparams) - set(schema)
        if unknown:
            raise ConfigError(f"{self.family}: unknown hyperparameter(s) {', '.join(sorted(unknown))}")
        params = {}
        for key, (default, check) in schema.items():
            raw = self.hyperparams.get(key, default)
            try:
                params[key] = check(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"{self.family}: invalid value {raw!r} for {key}") from None
        object.__setattr__(self, "hyperparams", params)
        object.__setattr__(self, "seed", int(self.seed))

    def replace(self, seed=None, **hyperparams) -> "ModelSpec":
        return ModelSpec(self.family, {**self.hyperparams, **hyperparams},
                         self.seed if seed is None else seed)

    def to_dict(self):
        return {"family": self.family, "hyperparams": dict(self.hyperparams), "seed": self.seed}


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    estimator: object
    n_classes: int
    n_features: int
    converged: bool = True

    def predict(self, X):
        return predict(self, X)


def _build(spec: ModelSpec):
    h = spec.hyperparams
    fam = spec.family
    if fam == "decision_tree":
        return DecisionTree(h["max_depth"], h["min_samples_leaf"])
    if fam == "random_forest":
        return RandomForest(h["n_trees"], h["max_features"], h["bootstrap"], h["max_depth"],
                            h["min_samples_leaf"], spec.seed)
    if fam == "knn":
        return KNeighbors(h["k"], h["metric"])
    if fam == "gaussian_nb":
        return GaussianNB(h["var_smoothing"])
    if fam == "logistic_regression":
        return LogisticRegression(h["l2_strength"], h["max_iters"], h["tol"])
    return LinearSVC(h["C"], h["max_iters"], h["tol"], spec.seed)


def fit_arrays(spec: ModelSpec, X, y, n_classes: int) -> TrainedModel:
    """Train on raw arrays; `train` is the dataset-level entry point."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DataError("training needs at least one feature")
    if X.shape[0] != y.shape[0]:
        raise DataError("X and y disagree on the number of samples")
    if not np.all(np.isfinite(X)):
        raise DataError("training values must be finite")
    if np.unique(y).size < 2:
        raise DataError("training set contains a single class")
    est = _build(spec)
    est.fit(X, y, n_classes)
    converged = bool(getattr(est, "converged_", True))
    if not converged:
        warnings.warn(f"{spec.family} did not reach tol within max_iters", ConvergenceWarning, stacklevel=2)
    return TrainedModel(spec, est, n_classes, X.shape[1], converged)


def train(spec: ModelSpec, ds: LabeledDataset) -> TrainedModel:
    return fit_arrays(spec, ds.X, ds.labels, ds.n_classes)


def predict(model: TrainedModel, X) -> np.ndarray:
    if isinstance(X, ExpressionMatrix):
        X = X.values
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[0] == 0:
        return np.zeros(0, dtype=int)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(f"model expects {model.n_features} features, got shape {X.shape}")
    return np.asarray(model.estimator.predict(X), dtype=int)


def impurity_importances(model: TrainedModel) -> np.ndarray:
    """Mean weighted Gini decrease per feature, normalized to sum to one."""
    if model.spec.family not in ("random_forest", "decision_tree"):
        raise ConfigError(f"impurity importances need a tree model, not {model.spec.family}")
    return model.estimator.importances()


def linear_weights(model: TrainedModel) -> np.ndarray:
    """Fitted weight matrix (classes x features; one row for binary problems)."""
    if model.spec.family not in LINEAR_FAMILIES:
        raise ConfigError(f"linear weights need a linear model, not {model.spec.family}")
    return model.estimator.weights()


def ranking_criterion(model: TrainedModel) -> np.ndarray:
    """Per-feature sum over classes of squared weights."""
    W = linear_weights(model)
    return (W * W).sum(axis=0)


_CLASSES = {
    "decision_tree": DecisionTree,
    "random_forest": RandomForest,
    "knn": KNeighbors,
    "gaussian_nb": GaussianNB,
    "logistic_regression": LogisticRegression,
    "linear_svc": LinearSVC,
}


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": "seqfs-model",
        "version": MODEL_FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "converged": model.converged,
        "state": model.estimator.to_state(),
    }


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format") != "seqfs-model":
        raise DataError("not a model document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')!r}")
    s = doc["spec"]
    spec = ModelSpec(s["family"], s["hyperparams"], s["seed"])
    est = _CLASSES[spec.family].from_state(doc["state"])
    return TrainedModel(spec, est, doc["n_classes"], doc["n_features"], doc["converged"])


def save_model(model: TrainedModel, path) -> None:
    atomic_write_text(path, dumps_json(model_to_dict(model)))


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


__all__ = [
    "FAMILIES", "LINEAR_FAMILIES", "ModelSpec", "TrainedModel", "ConvergenceWarning",
    "train", "fit_arrays", "predict", "impurity_importances", "linear_weights",
    "ranking_criterion", "default_hyperparams", "model_to_dict", "model_from_dict",
    "save_model", "load_model", "decide", "fit_hinge", "hinge_primal", "logistic_objective",
]
