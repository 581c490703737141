"""Shared fixtures-as-functions for the CLI and acceptance tests."""

from pathlib import Path

import numpy as np

from seqfs.cli import main


def write_count_tsv(path, n_per_class=10, n_genes=60, n_classes=3, seed=0, label_col="label"):
    """Poisson counts with shared gene baselines, per-sample depth and class-shifted genes.

    Samples correlate strongly (common baseline), so outlier removal keeps them.
    """
    r = np.random.default_rng(seed)
    base = np.exp(r.normal(4.0, 1.5, size=n_genes))
    labels = np.repeat(np.arange(n_classes), n_per_class)
    fold = np.ones((n_classes, n_genes))
    for c in range(n_classes):
        fold[c, 5 * c:5 * c + 5] = 6.0
    depth = r.uniform(0.5, 2.0, size=labels.size)
    counts = r.poisson(base[None, :] * fold[labels] * depth[:, None])
    lines = ["\t".join(["sample_id", label_col] + [f"g{j:03d}" for j in range(n_genes)])]
    for i, c in enumerate(labels):
        lines.append("\t".join([f"s{i:03d}", f"type{c}"] + [str(int(v)) for v in counts[i]]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    if capsys is not None:
        out = capsys.readouterr()
        return code, out.out, out.err
    return code


def tree_bytes(root):
    """{relative path: bytes} for every file under root."""
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
