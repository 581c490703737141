"""Expression matrices, labeled datasets, TSV ingestion, stratified splits and
the synthetic data generator.

Samples are rows and features are columns everywhere in this package.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .io import atomic_write_text


@dataclass(frozen=True)
class ExpressionMatrix:
    """Sample x feature matrix of finite, non-negative values."""

    values: np.ndarray
    sample_ids: tuple
    feature_ids: tuple

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"expression values must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "feature_ids", tuple(str(f) for f in self.feature_ids))
        n, p = values.shape
        if n != len(self.sample_ids) or p != len(self.feature_ids):
            raise DataError(
                f"shape {values.shape} does not match {len(self.sample_ids)} sample ids "
                f"and {len(self.feature_ids)} feature ids"
            )
        _check_unique(self.sample_ids, "sample id")
        _check_unique(self.feature_ids, "feature id")
        if values.size:
            if not np.all(np.isfinite(values)):
                raise DataError("expression values must be finite")
            if values.min() < 0:
                raise DataError("expression values must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take_samples(self, idx) -> "ExpressionMatrix":
        idx = np.asarray(idx, dtype=int)
        return ExpressionMatrix(
            self.values[idx], [self.sample_ids[i] for i in idx], self.feature_ids
        )

    def take_features(self, idx) -> "ExpressionMatrix":
        idx = np.asarray(idx, dtype=int)
        return ExpressionMatrix(
            self.values[:, idx], self.sample_ids, [self.feature_ids[j] for j in idx]
        )

    def feature_index(self, ids: Sequence[str]) -> np.ndarray:
        lookup = {f: j for j, f in enumerate(self.feature_ids)}
        try:
            return np.array([lookup[f] for f in ids], dtype=int)
        except KeyError as exc:
            raise DataError(f"unknown feature id {exc.args[0]!r}") from None


def _check_unique(ids, what):
    if len(set(ids)) != len(ids):
        seen = set()
        for i in ids:
            if i in seen:
                raise DataError(f"duplicate {what} {i!r}")
            seen.add(i)


@dataclass(frozen=True)
class LabeledDataset:
    matrix: ExpressionMatrix
    labels: np.ndarray
    class_names: tuple

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise DataError("labels must be integers")
        labels = labels.astype(int)
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        if labels.ndim != 1 or labels.shape[0] != self.matrix.n_samples:
            raise DataError(
                f"{labels.shape[0] if labels.ndim == 1 else labels.shape} labels for "
                f"{self.matrix.n_samples} samples"
            )
        k = len(self.class_names)
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise DataError(f"labels must lie in [0, {k})")
        missing = np.flatnonzero(np.bincount(labels, minlength=k) == 0)
        if missing.size:
            raise DataError(
                "every class must occur at least once; missing "
                + ", ".join(self.class_names[i] for i in missing)
            )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def X(self) -> np.ndarray:
        return self.matrix.values

    @property
    def y(self) -> np.ndarray:
        return self.labels

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def feature_ids(self) -> tuple:
        return self.matrix.feature_ids

    @property
    def sample_ids(self) -> tuple:
        return self.matrix.sample_ids

    def take_samples(self, idx) -> "LabeledDataset":
        """Row subset; raises DataError if a class would disappear."""
        idx = np.asarray(idx, dtype=int)
        return LabeledDataset(self.matrix.take_samples(idx), self.labels[idx], self.class_names)

    def take_features(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.matrix.take_features(idx), self.labels, self.class_names)

    def select_features(self, ids: Sequence[str]) -> "LabeledDataset":
        return self.take_features(self.matrix.feature_index(ids))

    def with_matrix(self, matrix: ExpressionMatrix) -> "LabeledDataset":
        """Attach labels to a processed matrix, matching rows by sample id.

        Classes with no remaining samples are dropped and labels re-encoded in
        the original class order.
        """
        pos = {s: i for i, s in enumerate(self.sample_ids)}
        try:
            rows = [pos[s] for s in matrix.sample_ids]
        except KeyError as exc:
            raise DataError(f"unknown sample id {exc.args[0]!r}") from None
        names = [self.class_names[i] for i in self.labels[rows]]
        return from_label_strings(matrix, names, order=self.class_names)


def from_label_strings(matrix: ExpressionMatrix, labels: Sequence[str], order=None) -> LabeledDataset:
    """Encode string labels by first appearance (or by `order`, skipping absent names)."""
    labels = [str(v) for v in labels]
    if order is None:
        names = list(dict.fromkeys(labels))
    else:
        present = set(labels)
        names = [c for c in order if c in present]
    code = {c: i for i, c in enumerate(names)}
    return LabeledDataset(matrix, np.array([code[v] for v in labels], dtype=int), names)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def folds(self):
        """Yield (train_idx, test_idx) for each fold in fold order."""
        for f in range(self.k):
            yield np.flatnonzero(self.assignments != f), np.flatnonzero(self.assignments == f)


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int
    n_features: int
    n_informative: int
    n_classes: int
    class_separation: float = 3.0
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.n_informative <= self.n_features:
            raise DataError("need 0 < n_informative <= n_features")
        if self.n_classes < 2:
            raise DataError("need n_classes >= 2")
        if self.n_samples < 2 * self.n_classes:
            raise DataError("need n_samples >= 2 * n_classes")
        if not (self.class_separation > 0 and self.noise_std > 0):
            raise DataError("class_separation and noise_std must be positive")


# ---------------------------------------------------------------- TSV

def load_tsv(path, label_column: str) -> LabeledDataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    if not header or header[0] != "sample_id":
        raise DataError(f"{path}: first header field must be 'sample_id'")
    if len(set(header)) != len(header):
        dup = next(h for h in header if header.count(h) > 1)
        raise DataError(f"{path}: duplicate header field {dup!r}")
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not in header")
    lab = header.index(label_column)
    feat_cols = [j for j in range(1, len(header)) if j != lab]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no samples")

    values = np.empty((len(body), len(feat_cols)))
    sample_ids, labels = [], []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        sample_ids.append(row[0])
        labels.append(row[lab])
        for out_j, j in enumerate(feat_cols):
            cell = row[j]
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i}, column {header[j]!r}: non-numeric value {cell!r}") from None
            if not math.isfinite(v) or v < 0:
                raise DataError(f"{path}: row {i}, column {header[j]!r}: invalid value {cell!r}")
            values[i - 2, out_j] = v
    matrix = ExpressionMatrix(values, sample_ids, [header[j] for j in feat_cols])
    return from_label_strings(matrix, labels)


def format_value(v: float) -> str:
    return repr(float(v))


def tsv_text(ds: LabeledDataset, label_column: str = "label") -> str:
    lines = ["\t".join(["sample_id", label_column, *ds.feature_ids])]
    for i, sid in enumerate(ds.sample_ids):
        cells = [format_value(v) for v in ds.X[i]]
        lines.append("\t".join([sid, ds.class_names[ds.labels[i]], *cells]))
    return "\n".join(lines) + "\n"


def write_tsv(ds: LabeledDataset, path, label_column: str = "label") -> None:
    atomic_write_text(path, tsv_text(ds, label_column))


# ---------------------------------------------------------------- splits

def _deal(labels, n_parts, rng):
    """Shuffle each class by rng and deal its members round-robin over parts.

    The starting part rotates with the running total so that part sizes stay
    balanced across classes as well.
    """
    labels = np.asarray(labels, dtype=int)
    out = np.empty(labels.shape[0], dtype=int)
    offset = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        out[members] = (np.arange(members.size) + offset) % n_parts
        offset += members.size
    return out


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    labels = np.asarray(labels, dtype=int)
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    counts = np.bincount(labels)
    present = counts[counts > 0]
    if present.size == 0 or present.min() < k:
        raise DataError(f"every class needs at least k={k} samples (smallest class has {present.min() if present.size else 0})")
    rng = np.random.default_rng(seed)
    return FoldPlan(k, _deal(labels, k, rng), seed)


def stratified_split(ds: LabeledDataset, test_fraction: float, seed: int):
    """Per-class holdout of round(count * fraction), clamped to [1, count - 1]."""
    if not 0 < test_fraction < 1:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    counts = np.bincount(ds.labels, minlength=ds.n_classes)
    if counts.min() < 2:
        raise DataError("every class needs at least 2 samples to split")
    rng = np.random.default_rng(seed)
    test = np.zeros(ds.matrix.n_samples, dtype=bool)
    for c in range(ds.n_classes):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        n_test = min(max(int(round(members.size * test_fraction)), 1), members.size - 1)
        test[members[:n_test]] = True
    return ds.take_samples(np.flatnonzero(~test)), ds.take_samples(np.flatnonzero(test))


# ---------------------------------------------------------------- synthetic

def generate_synthetic(spec: SyntheticSpec):
    """Gaussian class blobs on a random subset of informative columns.

    Each informative column gets a class mean of +sep/2 or -sep/2 per class,
    with at least one class on each side so every such column separates some
    pair of classes. The whole matrix is shifted by one constant to make it
    non-negative. Returns (dataset, informative_mask).
    """
    rng = np.random.default_rng(spec.seed)
    n, p, k = spec.n_samples, spec.n_features, spec.n_classes
    labels = rng.permutation(np.arange(n) % k)
    informative = np.sort(rng.choice(p, size=spec.n_informative, replace=False))

    signs = rng.choice([-1.0, 1.0], size=(k, spec.n_informative))
    flat = np.all(signs == signs[0], axis=0)
    signs[rng.integers(0, k, size=flat.sum()), np.flatnonzero(flat)] *= -1
    means = np.zeros((k, p))
    means[:, informative] = signs * (spec.class_separation / 2.0)

    X = rng.normal(0.0, spec.noise_std, size=(n, p)) + means[labels]
    X = X + max(0.0, -X.min())

    mask = np.zeros(p, dtype=bool)
    mask[informative] = True
    width = len(str(max(n, p) - 1))
    matrix = ExpressionMatrix(
        X,
        [f"s{i:0{width}d}" for i in range(n)],
        [f"f{j:0{width}d}" for j in range(p)],
    )
    ds = LabeledDataset(matrix, labels, [f"class{c}" for c in range(k)])
    return ds, mask
