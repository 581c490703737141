"""Count-space cleaning and normalization.

Pipeline order used by :func:`run_preprocess`: outlier samples, quantile-mean
filter, low-count filter, median-of-ratios size factors, log transform and an
optional two-group differential-expression screen on the transformed values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dataset import ExpressionMatrix
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class PreprocessConfig:
    corr_threshold: float = 0.6
    quantile_cut: float = 0.25
    min_row_sum: float = 10.0
    de_fdr: float = 0.05
    de_min_abs_effect: float = 1.0

    def __post_init__(self):
        for name in ("corr_threshold", "quantile_cut", "de_fdr"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if not self.min_row_sum >= 0:
            raise ConfigError("min_row_sum must be non-negative")
        if not self.de_min_abs_effect >= 0:
            raise ConfigError("de_min_abs_effect must be non-negative")


@dataclass(frozen=True)
class SizeFactors:
    factors: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=float)
        if not (np.all(np.isfinite(f)) and np.all(f > 0)):
            raise DataError("size factors must be finite and positive")
        object.__setattr__(self, "factors", f)


def remove_outlier_samples(m: ExpressionMatrix, corr_threshold: float):
    """Drop samples whose mean Pearson correlation with the others is below the threshold.

    Single pass: correlations are computed once on the input.
    Returns (filtered matrix, removed sample ids).
    """
    if m.n_samples < 3:
        raise DataError("outlier removal needs at least 3 samples")
    X = m.values
    flat = np.flatnonzero(X.std(axis=1) == 0)
    if flat.size:
        raise DataError(f"sample {m.sample_ids[flat[0]]!r} has zero variance; correlation undefined")
    r = np.corrcoef(X)
    n = m.n_samples
    mean_r = (r.sum(axis=1) - np.diag(r)) / (n - 1)
    keep = mean_r >= corr_threshold
    removed = [m.sample_ids[i] for i in np.flatnonzero(~keep)]
    return m.take_samples(np.flatnonzero(keep)), removed


def quantile_filter(m: ExpressionMatrix, quantile_cut: float) -> ExpressionMatrix:
    """Keep features whose mean is strictly above the quantile of all feature means."""
    if m.values.size == 0:
        raise DataError("quantile filter on an empty matrix")
    means = m.values.mean(axis=0)
    cutoff = np.quantile(means, quantile_cut, method="linear")
    return m.take_features(np.flatnonzero(means > cutoff))


def low_count_filter(m: ExpressionMatrix, min_row_sum: float) -> ExpressionMatrix:
    totals = m.values.sum(axis=0)
    return m.take_features(np.flatnonzero(totals >= min_row_sum))


def size_factors(m: ExpressionMatrix) -> SizeFactors:
    """Median-of-ratios size factors over features positive in every sample."""
    X = m.values
    ref = np.all(X > 0, axis=0) if X.size else np.zeros(X.shape[1], dtype=bool)
    if not ref.any():
        raise DataError("no feature is positive in every sample; size factors undefined")
    logs = np.log(X[:, ref])
    log_geo = logs.mean(axis=0)
    return SizeFactors(np.exp(np.median(logs - log_geo, axis=1)))


def vst_transform(m: ExpressionMatrix, sf: SizeFactors) -> ExpressionMatrix:
    """log2(count / size_factor + 1), elementwise per sample."""
    f = sf.factors
    if f.shape[0] != m.n_samples:
        raise DataError(f"{f.shape[0]} size factors for {m.n_samples} samples")
    return ExpressionMatrix(np.log2(m.values / f[:, None] + 1.0), m.sample_ids, m.feature_ids)


def bh_qvalues(p) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(p, dtype=float)
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, m + 1, dtype=float)
    scaled = p[order] * float(m) / ranks
    q_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    q = np.empty(m)
    q[order] = np.minimum(q_sorted, 1.0)
    return q


def welch_test(a: np.ndarray, b: np.ndarray):
    """Column-wise Welch t-test of b against a.

    Returns (mean difference b - a, two-sided p). A column with zero variance
    in both groups gets p = 1 when the means agree and p = 0 otherwise.
    """
    na, nb = a.shape[0], b.shape[0]
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    va, vb = a.var(axis=0, ddof=1) / na, b.var(axis=0, ddof=1) / nb
    diff = mb - ma
    se2 = va + vb
    p = np.where(diff == 0, 1.0, 0.0)
    ok = se2 > 0
    if ok.any():
        t = diff[ok] / np.sqrt(se2[ok])
        df = se2[ok] ** 2 / (va[ok] ** 2 / (na - 1) + vb[ok] ** 2 / (nb - 1))
        p[ok] = np.minimum(2.0 * stats.t.sf(np.abs(t), df), 1.0)
    return diff, p


@dataclass(frozen=True)
class DETable:
    feature_ids: tuple
    effect: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def rows(self):
        for j, fid in enumerate(self.feature_ids):
            yield fid, float(self.effect[j]), float(self.p[j]), float(self.q[j])


def differential_expression(m: ExpressionMatrix, group_labels, cfg: PreprocessConfig = PreprocessConfig()):
    """Welch t-test per feature with BH control.

    A feature passes when q <= de_fdr and |mean(group 1) - mean(group 0)| >=
    de_min_abs_effect. Returns (mask, DETable) with rows in feature order.
    """
    g = np.asarray(group_labels)
    if g.shape != (m.n_samples,) or not np.isin(g, (0, 1)).all():
        raise DataError("group labels must be 0/1, one per sample")
    g = g.astype(int)
    if min((g == 0).sum(), (g == 1).sum()) < 2:
        raise DataError("each group needs at least 2 samples")
    diff, p = welch_test(m.values[g == 0], m.values[g == 1])
    q = bh_qvalues(p)
    mask = (q <= cfg.de_fdr) & (np.abs(diff) >= cfg.de_min_abs_effect)
    return mask, DETable(m.feature_ids, diff, p, q)


@dataclass
class PreprocessResult:
    matrix: ExpressionMatrix
    removed_samples: list
    dropped_features: list
    size_factors: SizeFactors
    de_table: DETable | None = None


def run_preprocess(m: ExpressionMatrix, cfg: PreprocessConfig = PreprocessConfig(), group_labels=None) -> PreprocessResult:
    """Full cleaning chain; `group_labels` (aligned with `m`) enables the DE screen."""
    kept, removed = remove_outlier_samples(m, cfg.corr_threshold)
    if kept.n_samples < 2:
        raise DataError(f"{len(removed)} of {m.n_samples} samples fall below the correlation threshold "
                        f"{cfg.corr_threshold}; fewer than 2 remain")
    pos = {s: i for i, s in enumerate(m.sample_ids)}
    filt = low_count_filter(quantile_filter(kept, cfg.quantile_cut), cfg.min_row_sum)
    if filt.n_features == 0:
        raise DataError("no features left after filtering")
    sf = size_factors(filt)
    out = vst_transform(filt, sf)
    table = None
    if group_labels is not None:
        rows = [pos[s] for s in out.sample_ids]
        mask, table = differential_expression(out, np.asarray(group_labels)[rows], cfg)
        out = out.take_features(np.flatnonzero(mask))
    kept_ids = set(out.feature_ids)
    dropped = [f for f in m.feature_ids if f not in kept_ids]
    return PreprocessResult(out, removed, dropped, sf, table)
