"""PCA embeddings, k-nearest-neighbor connectivity graphs and SVG scatter plots."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import ExpressionMatrix
from .errors import DataError
from .io import atomic_write_text


@dataclass(frozen=True)
class Embedding:
    coordinates: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    mean: np.ndarray = None
    sample_ids: tuple = ()

    @property
    def d(self):
        return self.components.shape[0]

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) @ self.components.T


def _values(X):
    return X.values if isinstance(X, ExpressionMatrix) else np.asarray(X, dtype=float)


def pca(X, d: int) -> Embedding:
    """Economy SVD of the column-centered matrix, top-d right singular vectors.

    Each component is flipped so that its largest-magnitude loading (first one
    on ties) is positive.
    """
    A = _values(X)
    if A.ndim != 2 or A.shape[0] < 2:
        raise DataError("PCA needs at least 2 samples")
    n, f = A.shape
    if not 1 <= d <= min(n - 1, f):
        raise DataError(f"d must lie in [1, {min(n - 1, f)}], got {d}")
    mean = A.mean(axis=0)
    Ac = A - mean
    _, s, vt = np.linalg.svd(Ac, full_matrices=False)
    total = float((s * s).sum())
    if not total > 0:
        raise DataError("all samples are identical; total variance is zero")
    comps = vt[:d].copy()
    lead = np.argmax(np.abs(comps), axis=1)
    signs = np.where(comps[np.arange(d), lead] < 0, -1.0, 1.0)
    comps *= signs[:, None]
    ratio = (s[:d] ** 2) / total
    ids = X.sample_ids if isinstance(X, ExpressionMatrix) else ()
    return Embedding(Ac @ comps.T, comps, ratio, mean, ids)


def reconstruction_error(X, e: Embedding) -> float:
    A = _values(X)
    Ac = A - e.mean
    return float(np.linalg.norm(Ac - (Ac @ e.components.T) @ e.components))


# ---------------------------------------------------------------- k-NN graph

@dataclass(frozen=True)
class WeightedGraph:
    """`edges` are the symmetrized (i < j) weights; `directed` keeps each node's k out-edges."""

    nodes: tuple
    edges: tuple
    directed: tuple
    k: int
    metric: str

    def connectivity(self) -> float:
        """Total symmetrized edge weight per node."""
        return float(sum(w for _, _, w in self.edges)) / len(self.nodes)

    def weight_matrix(self):
        W = np.zeros((len(self.nodes), len(self.nodes)))
        for i, j, w in self.edges:
            W[i, j] = W[j, i] = w
        return W


def pairwise_distances(A, metric):
    if metric == "euclidean":
        return cdist(A, A, "euclidean")
    if metric == "correlation":
        flat = np.flatnonzero(A.std(axis=1) == 0)
        if flat.size:
            raise DataError(f"sample {int(flat[0])} is constant; correlation distance undefined")
        return cdist(A, A, "correlation")
    raise DataError(f"unknown metric {metric!r}; use euclidean or correlation")


def knn_graph(X, k: int, metric: str = "euclidean") -> WeightedGraph:
    """k-NN graph with exponential weights and fuzzy-union symmetrization.

    Node i's edge to neighbor j weighs exp(-(d_ij - d_min_i) / scale_i), where
    d_min_i is its nearest distance and scale_i the mean of its k distances
    minus d_min_i (floored at 1e-12). Undirected weight: w_ij + w_ji - w_ij*w_ji.
    Distance ties go to the lower sample index.
    """
    A = _values(X)
    n = A.shape[0]
    if not 1 <= k < n:
        raise DataError(f"k must lie in [1, {n - 1}], got {k}")
    D = pairwise_distances(A, metric)
    np.fill_diagonal(D, np.inf)
    directed = []
    W = np.zeros((n, n))
    tiny = np.finfo(float).tiny
    for i in range(n):
        nbrs = np.argsort(D[i], kind="stable")[:k]
        dist = D[i, nbrs]
        dmin = dist[0]
        scale = max(dist.mean() - dmin, 1e-12)
        w = np.maximum(np.exp(-(dist - dmin) / scale), tiny)
        for j, wij in zip(nbrs, w):
            directed.append((i, int(j), float(wij)))
            W[i, j] = wij
    S = W + W.T - W * W.T
    rows, cols = np.nonzero(np.triu(S, 1))
    edges = tuple((int(i), int(j), float(S[i, j])) for i, j in zip(rows, cols))
    nodes = X.sample_ids if isinstance(X, ExpressionMatrix) else tuple(str(i) for i in range(n))
    return WeightedGraph(tuple(nodes), edges, tuple(directed), k, metric)


def graph_to_dot(g: WeightedGraph) -> str:
    lines = ["graph knn {"]
    for name in g.nodes:
        lines.append(f"  {_dot_id(name)};")
    for i, j, w in g.edges:
        lines.append(f"  {_dot_id(g.nodes[i])} -- {_dot_id(g.nodes[j])} [weight={w:.6f}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_id(name):
    return '"' + str(name).replace("\\", "\\\\").replace('"', '\\"') + '"'


def graph_edge_rows(g: WeightedGraph):
    return [[g.nodes[i], g.nodes[j], f"{w:.6f}"] for i, j, w in g.edges]


# ---------------------------------------------------------------- scatter

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _scale(v, lo, hi):
    vmin, vmax = float(v.min()), float(v.max())
    if vmax == vmin:
        return np.full(v.shape, (lo + hi) / 2.0)
    return lo + (v - vmin) / (vmax - vmin) * (hi - lo)


def scatter_svg(e: Embedding, labels, class_names, width=640, height=480) -> str:
    if e.d < 2:
        raise DataError("a scatter plot needs an embedding with d >= 2")
    labels = np.asarray(labels, dtype=int)
    if labels.shape[0] != e.coordinates.shape[0]:
        raise DataError("one label per embedded sample is required")
    legend_w = 150
    pad = 30
    xs = _scale(e.coordinates[:, 0], pad, width - legend_w - pad)
    ys = _scale(e.coordinates[:, 1], height - pad, pad)  # y axis points up
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad}" y="18" font-family="sans-serif" font-size="12">PC1 ({100 * e.explained_variance_ratio[0]:.1f}%)'
        f' vs PC2 ({100 * e.explained_variance_ratio[1]:.1f}%)</text>',
        '<g id="points">',
    ]
    for x, y, c in zip(xs, ys, labels):
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="4" fill="{PALETTE[c % len(PALETTE)]}" fill-opacity="0.8"/>')
    out.append("</g>")
    out.append('<g id="legend">')
    for c, name in enumerate(class_names):
        top = pad + 20 * c
        out.append(f'<rect x="{width - legend_w + 10}" y="{top}" width="12" height="12" '
                   f'fill="{PALETTE[c % len(PALETTE)]}"/>')
        out.append(f'<text x="{width - legend_w + 28}" y="{top + 10}" font-family="sans-serif" '
                   f'font-size="12">{escape(str(name))}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_scatter(e: Embedding, labels, path, class_names=None) -> None:
    """Write coordinate columns 1-2 as an SVG scatter, one color per class."""
    labels = np.asarray(labels, dtype=int)
    if class_names is None:
        class_names = [str(c) for c in range(int(labels.max()) + 1 if labels.size else 0)]
    atomic_write_text(path, scatter_svg(e, labels, class_names))
