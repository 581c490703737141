"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error,
3 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import traceback
from pathlib import Path

from . import bench as benchmod
from .classifiers import FAMILIES, model_from_dict, model_to_dict, predict, train
from .config import build_run_config, load_config_file, number
from .dataset import SyntheticSpec, generate_synthetic, load_tsv, write_tsv
from .embed import graph_edge_rows, graph_to_dot, knn_graph, pca, render_scatter
from .errors import ConfigError, DataError
from .evaluation import evaluate, grid_search
from .io import atomic_write_text, write_csv, write_json
from .preprocess import run_preprocess
from .selection import STRATEGIES, run_strategy

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

A1_SYNTH = {"n_samples": 200, "n_features": 2000, "n_informative": 40, "n_classes": 4,
            "class_separation": 3.0, "noise_std": 1.0}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, help="global seed; every stage seed derives from it")
    p.add_argument("--config", help="flat section.key=value config file")
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--label-col", dest="label_col", help="label column of the dataset TSV (default: label)")
    p.add_argument("--data", action="append", help="dataset TSV (repeat for several in bench)")
    p.add_argument("--no-timing", dest="no_timing", action="store_true",
                   help="omit timing and environment fields so outputs are byte-comparable")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="seqfs", description="Sequential feature selection for expression data.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", parents=[common], help="write a synthetic labeled dataset")
    p.add_argument("--n-samples", type=int)
    p.add_argument("--n-features", type=int)
    p.add_argument("--n-informative", type=int)
    p.add_argument("--n-classes", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--noise", type=float)

    p = sub.add_parser("preprocess", parents=[common], help="outlier removal, filtering, normalization, DE screen")
    p.add_argument("--de-reference", dest="de_reference",
                   help="class used as DE group 0 (all other samples form group 1); omit to skip DE")

    sub.add_parser("baseline", parents=[common], help="six model families with default settings")

    p = sub.add_parser("select", parents=[common], help="run one selection strategy")
    p.add_argument("--strategy", choices=STRATEGIES, default="combined")
    p.add_argument("--rfe-target", dest="rfe_target", type=int, help="target count for --strategy rfe")

    p = sub.add_parser("eval", parents=[common], help="train (or load) a model and score it on the test split")
    p.add_argument("--family", choices=FAMILIES, default="linear_svc")
    p.add_argument("--features", help="one-column CSV of feature ids to keep")
    p.add_argument("--model", help="evaluate a saved model instead of training one")

    p = sub.add_parser("grid", parents=[common], help="cross-validated grid search on the train split")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--param", action="append", default=[], help="name=v1,v2,... (repeatable)")
    p.add_argument("--k", type=int, help="folds (default 5)")

    p = sub.add_parser("embed", parents=[common], help="PCA coordinates, k-NN graph and scatter plot")
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--metric", choices=("euclidean", "correlation"))

    p = sub.add_parser("bench", parents=[common], help="time and score the four selection strategies")
    p.add_argument("--rfe-target", dest="rfe_target", help="integer, or auto (default)")
    p.add_argument("--synthetic", action="store_true",
                   help="benchmark a generated dataset (synth.* keys, 200x2000 by default) instead of --data")
    return parser


# ---------------------------------------------------------------- helpers

def _run_config(args):
    flat = load_config_file(args.config) if args.config else {}
    data = tuple(args.data) if args.data else None
    return build_run_config(flat, seed=args.seed, out=args.out, label_col=args.label_col, data=data)


def _datasets(cfg, need_one=True):
    if not cfg.data:
        raise ConfigError("no dataset given; use --data or run.data")
    if need_one and len(cfg.data) > 1:
        raise ConfigError("this command takes a single dataset")
    out = []
    for path in cfg.data:
        out.append((Path(path).stem, load_tsv(path, cfg.label_col)))
    return out


def _read_feature_list(path):
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines or lines[0] != "feature_id":
        raise DataError(f"{path}: expected a one-column CSV headed 'feature_id'")
    return lines[1:]


def _say(msg):
    print(msg, flush=True)


# ---------------------------------------------------------------- commands

def cmd_synth(args, cfg):
    params = dict(A1_SYNTH)
    params.update(cfg.synth)
    for key, flag in (("n_samples", args.n_samples), ("n_features", args.n_features),
                      ("n_informative", args.n_informative), ("n_classes", args.n_classes),
                      ("class_separation", args.separation), ("noise_std", args.noise)):
        if flag is not None:
            params[key] = flag
    spec = SyntheticSpec(seed=cfg.seed, **params)
    ds, mask = generate_synthetic(spec)
    out = Path(cfg.out)
    write_tsv(ds, out / "synthetic.tsv", cfg.label_col)
    write_csv(out / "informative_features.csv", ["feature_id", "informative"],
              [[f, int(m)] for f, m in zip(ds.feature_ids, mask)])
    write_json(out / "synth.json", {"spec": {**params, "seed": cfg.seed}, "n_informative_features": int(mask.sum())})
    _say(f"wrote {out / 'synthetic.tsv'} ({ds.matrix.n_samples} samples x {ds.matrix.n_features} features)")


def cmd_preprocess(args, cfg):
    (_, ds), = _datasets(cfg)
    reference = args.de_reference or cfg.de_reference
    groups = None
    if reference is not None:
        if reference not in ds.class_names:
            raise DataError(f"DE reference class {reference!r} not among {list(ds.class_names)}")
        groups = (ds.labels != ds.class_names.index(reference)).astype(int)
    res = run_preprocess(ds.matrix, cfg.preprocess, groups)
    out_ds = ds.with_matrix(res.matrix)
    out = Path(cfg.out)
    write_tsv(out_ds, out / "preprocessed.tsv", cfg.label_col)
    kept = [s for s in ds.sample_ids if s not in set(res.removed_samples)]
    side = {
        "removed_samples": list(res.removed_samples),
        "dropped_features": list(res.dropped_features),
        "size_factors": {s: float(f) for s, f in zip(kept, res.size_factors.factors)},
        "n_samples": res.matrix.n_samples,
        "n_features": res.matrix.n_features,
        "de_reference": reference,
        "config": dataclasses.asdict(cfg.preprocess),
    }
    if res.de_table is not None:
        write_csv(out / "de_table.csv", ["feature_id", "effect", "p_value", "q_value"],
                  [[f, repr(e), repr(p), repr(q)] for f, e, p, q in res.de_table.rows()])
        side["de_table"] = "de_table.csv"
    write_json(out / "preprocess.json", side)
    _say(f"kept {res.matrix.n_samples} samples, {res.matrix.n_features} features; "
         f"removed {len(res.removed_samples)} samples")


def cmd_baseline(args, cfg):
    (_, ds), = _datasets(cfg)
    rows = benchmod.run_baseline(cfg, ds)
    out = Path(cfg.out)
    write_json(out / "baseline.json", {
        "note": "default hyperparameters for every family",
        "rows": [{"family": r.family, "train_accuracy": r.train_accuracy, "test_accuracy": r.test_accuracy,
                  "train_accuracy_percent": f"{100 * r.train_accuracy:.1f}",
                  "test_accuracy_percent": f"{100 * r.test_accuracy:.1f}",
                  "spec": r.spec.to_dict()} for r in rows],
    })
    write_csv(out / "baseline.csv", ["family", "train_accuracy", "test_accuracy", "test_accuracy_percent"],
              [[r.family, repr(r.train_accuracy), repr(r.test_accuracy), f"{100 * r.test_accuracy:.1f}"] for r in rows])
    for r in rows:
        _say(f"{r.family:20s} train {100 * r.train_accuracy:5.1f}  test {100 * r.test_accuracy:5.1f}")


def cmd_select(args, cfg):
    (_, ds), = _datasets(cfg)
    tr, _ = benchmod.split(cfg, ds)
    result = run_strategy(args.strategy, tr, cfg.selector_config(), rfe_target=args.rfe_target)
    timing = not args.no_timing
    out = Path(cfg.out)
    doc = {"strategy": args.strategy, "n_train": tr.matrix.n_samples, **result.to_dict(timing)}
    if timing:
        doc["note"] = benchmod.TIMING_NOTE
    write_json(out / "selection.json", doc)
    write_csv(out / "selected_features.csv", ["feature_id"], [[f] for f in result.final_selected])
    _say(f"{args.strategy}: {len(result.final_selected)} features selected "
         f"({' -> '.join(str(len(s.selected_ids)) for s in result.stages)})")


def cmd_eval(args, cfg):
    (_, ds), = _datasets(cfg)
    tr, te = benchmod.split(cfg, ds)
    out = Path(cfg.out)
    if args.model:
        doc = _load_model_doc(args.model)
        feature_ids = doc["feature_ids"]
        model = model_from_dict(doc["model"])
        if list(doc["class_names"]) != list(ds.class_names):
            raise DataError("model classes differ from the dataset's classes")
    else:
        feature_ids = _read_feature_list(args.features) if args.features else list(ds.feature_ids)
        model = train(cfg.model_spec(args.family, f"eval/{args.family}"), tr.select_features(feature_ids))
        write_json(out / "model.json", {"model": model_to_dict(model), "feature_ids": list(feature_ids),
                                        "class_names": list(ds.class_names)})
    y_hat = predict(model, te.select_features(feature_ids).X)
    rep = evaluate(te.labels, y_hat, ds.n_classes)
    write_json(out / "metrics.json", {"family": model.spec.family, "n_features": len(feature_ids),
                                      "n_test": te.matrix.n_samples, **rep.to_dict(ds.class_names)})
    header, rows = rep.csv_rows(ds.class_names)
    write_csv(out / "metrics.csv", header, rows)
    _say(f"{model.spec.family}: test accuracy {rep.accuracy_percent}%  g-mean {rep.g_mean:.4f}")


def _load_model_doc(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from None
    if not isinstance(doc, dict) or not {"model", "feature_ids", "class_names"} <= set(doc):
        raise DataError(f"{path}: not a model file written by 'eval'")
    return doc


def _parse_param(text):
    if "=" not in text:
        raise ConfigError(f"--param expects name=v1,v2,..., got {text!r}")
    name, values = text.split("=", 1)
    return name.strip(), [v.strip() for v in values.split(",") if v.strip()]


def cmd_grid(args, cfg):
    (_, ds), = _datasets(cfg)
    family = args.family or cfg.grid_family
    grid = dict(cfg.grid)
    for text in args.param:
        name, values = _parse_param(text)
        grid[name] = values
    if not grid:
        raise ConfigError("no grid given; use --param name=v1,v2 or grid.<name>= in the config")
    tr, _ = benchmod.split(cfg, ds)
    best, table = grid_search(tr, family, grid, args.k or cfg.grid_k, cfg.seed)
    keys = list(grid)
    out = Path(cfg.out)
    write_json(out / "grid.json", {
        "family": family,
        "k": args.k or cfg.grid_k,
        "best_params": best,
        "rows": [{"params": r.params, "mean_accuracy": r.mean_accuracy, "fold_accuracies": list(r.fold_accuracies)}
                 for r in table],
    })
    write_csv(out / "grid.csv", [*keys, "mean_accuracy", "fold_accuracies"],
              [[*(r.params[k] for k in keys), repr(r.mean_accuracy), ";".join(repr(a) for a in r.fold_accuracies)]
               for r in table])
    _say(f"best {family} params: {best}")


def cmd_embed(args, cfg):
    (_, ds), = _datasets(cfg)
    d = args.d or cfg.embed.get("d", 2)
    k = args.k or cfg.embed.get("k", 10)
    metric = args.metric or cfg.embed.get("metric", "euclidean")
    e = pca(ds.matrix, d)
    g = knn_graph(ds.matrix, k, metric)
    out = Path(cfg.out)
    write_csv(out / "embedding.csv", ["sample_id", "label", *(f"pc{i + 1}" for i in range(d))],
              [[s, ds.class_names[c], *(repr(float(v)) for v in row)]
               for s, c, row in zip(ds.sample_ids, ds.labels, e.coordinates)])
    write_csv(out / "knn_edges.csv", ["source_id", "target_id", "weight"], graph_edge_rows(g))
    atomic_write_text(out / "knn_graph.dot", graph_to_dot(g))
    if d >= 2:
        render_scatter(e, ds.labels, out / "scatter.svg", ds.class_names)
    write_json(out / "embed.json", {
        "d": d, "k": k, "metric": metric,
        "explained_variance_ratio": [float(v) for v in e.explained_variance_ratio],
        "n_edges": len(g.edges),
        "connectivity_per_sample": g.connectivity(),
    })
    _say(f"PCA d={d}: explained {100 * e.explained_variance_ratio.sum():.1f}%; "
         f"k-NN connectivity per sample {g.connectivity():.4f}")


def cmd_bench(args, cfg):
    timing = not args.no_timing
    if args.rfe_target is not None:
        target = args.rfe_target if args.rfe_target == "auto" else int(number(args.rfe_target))
        cfg = dataclasses.replace(cfg, bench_rfe_target=target)
    if args.synthetic:
        params = dict(A1_SYNTH)
        params.update(cfg.synth)
        ds, _ = generate_synthetic(SyntheticSpec(seed=cfg.seed, **params))
        datasets = [("synthetic", ds)]
    else:
        datasets = _datasets(cfg, need_one=False)
    out = Path(cfg.out)
    for name, ds in datasets:
        rep = benchmod.run_benchmark(cfg, ds, name)
        write_json(out / f"bench_{name}.json", rep.to_dict(timing))
        header, rows = rep.csv_rows(timing)
        write_csv(out / f"bench_{name}.csv", header, rows)
        _say(f"[{name}] {benchmod.TIMING_NOTE}")
        for r in rep.rows:
            acc = r.report.accuracy_percent if r.report is not None else "n/a"
            t = f"{r.wall_time_seconds:8.3f}s" if timing else ""
            _say(f"  {r.strategy:10s} {t} n_selected={r.n_selected:5d} accuracy={acc}"
                 + (f" ERROR {r.error}" if r.error else ""))


COMMANDS = {
    "synth": cmd_synth, "preprocess": cmd_preprocess, "baseline": cmd_baseline, "select": cmd_select,
    "eval": cmd_eval, "grid": cmd_grid, "embed": cmd_embed, "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _run_config(args)
        COMMANDS[args.command](args, cfg)
        return EXIT_OK
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
