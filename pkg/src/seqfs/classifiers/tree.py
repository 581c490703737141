"""CART decision trees (Gini) and bagged random forests."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


def _best_split(Xs, Y, min_samples_leaf):
    """Best Gini split over the columns of Xs.

    Xs holds the node's values for the candidate features in ascending
    feature-index order; Y is the node's one-hot label matrix. Ties resolve to
    the first candidate column, then to the lowest threshold, because argmax
    scans the (feature, position) grid in that order.

    Returns (column, threshold, gain) or None when no valid split exists.
    """
    m = Xs.shape[0]
    order = np.argsort(Xs, axis=0, kind="stable")
    sv = np.take_along_axis(Xs, order, axis=0)
    total = Y.sum(axis=0)
    left = np.cumsum(Y[order], axis=0)[:-1]
    right = total - left
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left

    # n_left + n_right is constant, so only the squared-count terms vary; keeping
    # them as one commutative sum makes mirror-image ties bitwise equal
    score = (left * left).sum(axis=2) / n_left + (right * right).sum(axis=2) / n_right
    child = (m - score) / m
    parent = 1.0 - (total * total).sum() / (m * m)
    gain = parent - child

    valid = sv[1:] > sv[:-1]
    if min_samples_leaf > 1:
        sizes_ok = (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        valid &= sizes_ok
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain.T))
    col, pos = divmod(flat, m - 1)
    lo, hi = sv[pos, col], sv[pos + 1, col]
    thr = lo / 2.0 + hi / 2.0
    if thr >= hi or thr < lo:
        thr = lo
    return col, float(thr), float(gain[pos, col])


@njit(cache=True)
def _best_split_fast(X, idx, feats, y, n_classes, min_samples_leaf):
    """Compiled equivalent of `_best_split` on X[idx][:, feats].

    Same gain arithmetic and the same tie order (first feature, then lowest
    position). Returns (column, threshold, gain) with column -1 when no valid
    split exists.
    """
    m = idx.size
    total = np.zeros(n_classes)
    for i in range(m):
        total[y[idx[i]]] += 1.0
    parent = 1.0 - (total * total).sum() / (m * m)
    vals = np.empty(m)
    left = np.empty(n_classes)
    best_col, best_pos, best_gain = -1, -1, -np.inf
    best_lo, best_hi = 0.0, 0.0
    for c in range(feats.size):
        f = feats[c]
        for i in range(m):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        left[:] = 0.0
        for pos in range(m - 1):
            left[y[idx[order[pos]]]] += 1.0
            lo = vals[order[pos]]
            hi = vals[order[pos + 1]]
            n_left = pos + 1.0
            n_right = m - n_left
            if not hi > lo:
                continue
            if n_left < min_samples_leaf or n_right < min_samples_leaf:
                continue
            sl = 0.0
            sr = 0.0
            for k in range(n_classes):
                r = total[k] - left[k]
                sl += left[k] * left[k]
                sr += r * r
            child = (m - (sl / n_left + sr / n_right)) / m
            gain = parent - child
            if gain > best_gain:
                best_col, best_pos, best_gain = c, pos, gain
                best_lo, best_hi = lo, hi
    if best_col < 0:
        return -1, 0.0, 0.0
    thr = best_lo / 2.0 + best_hi / 2.0
    if thr >= best_hi or thr < best_lo:
        thr = best_lo
    return best_col, thr, best_gain


class DecisionTree:
    """CART classifier. Nodes are stored in flat arrays; leaves have feature -1."""

    def __init__(self, max_depth=None, min_samples_leaf=1, max_features=None):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features

    def fit(self, X, y, n_classes, rng=None, sample_idx=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if sample_idx is None:
            sample_idx = np.arange(X.shape[0])
        n_total = sample_idx.size
        p = X.shape[1]
        onehot = np.eye(n_classes)[y]
        y_codes = y.astype(np.int64)
        self.n_features = p
        self.n_classes = n_classes

        feature, threshold, left, right, counts = [], [], [], [], []
        raw_importance = np.zeros(p)

        def new_node(idx):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(onehot[idx].sum(axis=0))
            return len(feature) - 1

        stack = [(new_node(sample_idx), sample_idx, 0)]
        all_features = np.arange(p)
        while stack:
            node, idx, depth = stack.pop()
            m = idx.size
            if np.count_nonzero(counts[node]) <= 1:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            if m < 2 * self.min_samples_leaf:
                continue
            if self.max_features is None or self.max_features >= p:
                feats = all_features
            else:
                feats = np.sort(rng.choice(p, size=self.max_features, replace=False))
            col, thr, gain = _best_split_fast(X, idx, feats, y_codes, n_classes, self.min_samples_leaf)
            if col < 0:
                continue
            f = int(feats[col])
            raw_importance[f] += (m / n_total) * gain
            goes_left = X[idx, f] <= thr
            feature[node] = f
            threshold[node] = thr
            li, ri = idx[goes_left], idx[~goes_left]
            left[node] = new_node(li)
            right[node] = new_node(ri)
            # right pushed first so the left subtree is expanded first
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature_ = np.array(feature, dtype=int)
        self.threshold_ = np.array(threshold, dtype=float)
        self.left_ = np.array(left, dtype=int)
        self.right_ = np.array(right, dtype=int)
        self.counts_ = np.array(counts, dtype=float).reshape(-1, n_classes)
        self.raw_importance_ = raw_importance
        return self

    @property
    def n_nodes(self):
        return self.feature_.size

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature_[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold_[nd]
            node[inner] = np.where(go_left, self.left_[nd], self.right_[nd])

    def predict(self, X):
        return np.argmax(self.counts_[self.apply(X)], axis=1) if len(X) else np.zeros(0, dtype=int)

    def importances(self):
        return _normalize(self.raw_importance_)

    def to_state(self):
        return {
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "feature": self.feature_.tolist(),
            "threshold": self.threshold_.tolist(),
            "left": self.left_.tolist(),
            "right": self.right_.tolist(),
            "counts": self.counts_.tolist(),
            "raw_importance": self.raw_importance_.tolist(),
        }

    @classmethod
    def from_state(cls, s):
        t = cls(s["max_depth"], s["min_samples_leaf"], s["max_features"])
        t.n_features, t.n_classes = s["n_features"], s["n_classes"]
        t.feature_ = np.array(s["feature"], dtype=int)
        t.threshold_ = np.array(s["threshold"], dtype=float)
        t.left_ = np.array(s["left"], dtype=int)
        t.right_ = np.array(s["right"], dtype=int)
        t.counts_ = np.array(s["counts"], dtype=float).reshape(-1, t.n_classes)
        t.raw_importance_ = np.array(s["raw_importance"], dtype=float)
        return t


def _normalize(v):
    total = v.sum()
    return v / total if total > 0 else np.zeros_like(v)


def resolve_max_features(rule, n_features):
    if rule in (None, "all"):
        return n_features
    if rule == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    if rule == "log2":
        return max(1, math.ceil(math.log2(n_features))) if n_features > 1 else 1
    if isinstance(rule, float):
        return max(1, min(n_features, math.ceil(rule * n_features)))
    return min(int(rule), n_features)


class RandomForest:
    """Bagged CART trees with per-split feature subsampling and majority vote.

    Tree t draws its bootstrap sample and candidate features from a generator
    seeded by (seed, t), so results do not depend on training order.
    """

    def __init__(self, n_trees=100, max_features="sqrt", bootstrap=True, max_depth=None,
                 min_samples_leaf=1, seed=0):
        self.n_trees = n_trees
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=float)
        n, p = X.shape
        mf = resolve_max_features(self.max_features, p)
        self.n_features, self.n_classes = p, n_classes
        self.trees_ = []
        for t in range(self.n_trees):
            rng = np.random.default_rng([self.seed, t])
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.max_depth, self.min_samples_leaf, mf)
            self.trees_.append(tree.fit(X, y, n_classes, rng=rng, sample_idx=idx))
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        votes = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        for tree in self.trees_:
            votes[rows, tree.predict(X)] += 1
        return np.argmax(votes, axis=1)

    def importances(self):
        raw = np.mean([t.raw_importance_ for t in self.trees_], axis=0)
        return _normalize(raw)

    def to_state(self):
        return {
            "n_trees": self.n_trees,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "seed": self.seed,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "trees": [t.to_state() for t in self.trees_],
        }

    @classmethod
    def from_state(cls, s):
        f = cls(s["n_trees"], s["max_features"], s["bootstrap"], s["max_depth"],
                s["min_samples_leaf"], s["seed"])
        f.n_features, f.n_classes = s["n_features"], s["n_classes"]
        f.trees_ = [DecisionTree.from_state(t) for t in s["trees"]]
        return f
