"""Command-line entry point.

Subcommands: synth | validate | density | walk | embed | train | eval |
pipeline.  The pipeline caches per-graph stage outputs keyed by content
hash, so reruns with an unchanged config skip straight to the report.

Exit codes: 0 success, 1 config error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .density import Metric, density_profile, write_density_csv
from .graph import (
    DatasetError,
    GeneratorConfig,
    generate_synthetic,
    load_dataset,
    save_dataset,
    stratified_split,
)
from .metrics import accuracy
from .mpnn import InputMode, ModelConfig, Variant, build_inputs, save_model, train
from .sgns import EmbeddingMatrix, SgnsConfig, train_sgns
from .sweep import SweepConfig, compute_embeddings, grid_sweep, write_reports
from .walks import ThresholdRule, WalkConfig, generate_walks


class ConfigError(Exception):
    pass


class StageError(Exception):
    pass


def _log(msg):
    print(msg, flush=True)


def _atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(*parts):
    h = hashlib.sha256()
    for p in parts:
        h.update(p if isinstance(p, bytes) else str(p).encode())
        h.update(b"\x1f")
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Run-config parsing: flat key = value text, flags override file values.

_LIST_KEYS = {
    "seeds", "variants", "hidden_dims", "learning_rates",
    "density_metrics", "threshold_rules", "input_modes", "label_filter",
}

_DEFAULTS = {
    "task": "binary",
    "density_metric": "degree",
    "threshold_rule": "fixed_half",
    "input_mode": "RWW",
    "seeds": ["1", "2", "3"],
    "variants": ["gcn", "gat", "gin", "sage"],
    "hidden_dims": ["128", "256", "512", "1024"],
    "learning_rates": ["0.001", "0.0001", "0.00001"],
    "num_layers": "2",
    "epochs": "200",
    "patience": "20",
    "walk_length": "100",
    "walks_per_node": "1",
    "walk_seed": "0",
    "sgns_dim": "128",
    "sgns_window": "2",
    "sgns_negatives": "5",
    "sgns_epochs": "5",
    "sgns_lr": "0.025",
    "sgns_seed": "0",
    "output_dir": "runs/out",
    "label_filter": [],
}


def parse_run_config(path, overrides=None):
    cfg = dict(_DEFAULTS)
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        for lineno, line in enumerate(p.read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            cfg[key] = [v.strip() for v in value.split(",") if v.strip()] if key in _LIST_KEYS else value
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = [v.strip() for v in str(value).split(",")] if key in _LIST_KEYS else str(value)
    return _validate_run_config(cfg)


def _validate_run_config(cfg):
    if "dataset_root" not in cfg:
        raise ConfigError("missing required key: dataset_root")
    if cfg["task"] not in ("binary", "multiclass", "news_binary"):
        raise ConfigError(f"unknown task {cfg['task']!r}")
    try:
        cfg["density_metric"] = Metric(cfg["density_metric"])
        cfg["threshold_rule"] = ThresholdRule(cfg["threshold_rule"])
        cfg["input_mode"] = InputMode(cfg["input_mode"])
        cfg["density_metrics"] = tuple(
            Metric(m) for m in cfg.get("density_metrics", [cfg["density_metric"].value])
        )
        cfg["threshold_rules"] = tuple(
            ThresholdRule(r) for r in cfg.get("threshold_rules", [cfg["threshold_rule"].value])
        )
        cfg["input_modes"] = tuple(
            InputMode(m) for m in cfg.get("input_modes", [cfg["input_mode"].value])
        )
        cfg["variants"] = tuple(Variant(v) for v in cfg["variants"])
        cfg["seeds"] = tuple(int(s) for s in cfg["seeds"])
        cfg["hidden_dims"] = tuple(int(h) for h in cfg["hidden_dims"])
        cfg["learning_rates"] = tuple(float(l) for l in cfg["learning_rates"])
        for k in ("num_layers", "epochs", "patience", "walk_length", "walks_per_node",
                  "walk_seed", "sgns_dim", "sgns_window", "sgns_negatives",
                  "sgns_epochs", "sgns_seed"):
            cfg[k] = int(cfg[k])
        cfg["sgns_lr"] = float(cfg["sgns_lr"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    if not cfg["seeds"]:
        raise ConfigError("seeds must be non-empty")
    return cfg


def _walk_config(cfg, rule=None):
    return WalkConfig(
        walk_length=cfg["walk_length"],
        threshold_rule=rule or cfg["threshold_rule"],
        walks_per_node=cfg["walks_per_node"],
        seed=cfg["walk_seed"],
    )


def _sgns_config(cfg):
    return SgnsConfig(
        dim=cfg["sgns_dim"], window_radius=cfg["sgns_window"],
        negatives_per_positive=cfg["sgns_negatives"], epochs=cfg["sgns_epochs"],
        learning_rate=cfg["sgns_lr"], seed=cfg["sgns_seed"],
    )


def _sweep_config(cfg):
    return SweepConfig(
        task="multiclass" if cfg["task"] == "multiclass" else "binary",
        density_metrics=cfg["density_metrics"],
        threshold_rules=cfg["threshold_rules"],
        input_modes=cfg["input_modes"],
        variants=cfg["variants"],
        hidden_dims=cfg["hidden_dims"],
        learning_rates=cfg["learning_rates"],
        seeds=cfg["seeds"],
        walk=_walk_config(cfg),
        sgns=_sgns_config(cfg),
        num_layers=cfg["num_layers"],
        epochs=cfg["epochs"],
        patience=cfg["patience"],
        label_filter=tuple(cfg.get("label_filter", [])),
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args):
    cfg = GeneratorConfig(
        n_graphs_per_class=args.per_class,
        node_count_range=(args.min_nodes, args.max_nodes),
        dense_core_fraction=args.core_fraction,
        intra_core_edge_prob=args.intra_prob,
        background_edge_prob=args.background_prob,
        seed=args.seed,
        feature_dim=args.feature_dim,
    )
    dataset = generate_synthetic(cfg)
    save_dataset(dataset, args.out)
    _log(f"wrote {len(dataset)} graphs to {args.out}")
    return 0


def cmd_validate(args):
    root = Path(args.dataset_root)
    problems = []
    if not (root / "labels.json").exists():
        problems.append("missing labels.json")
    else:
        label_map = json.loads((root / "labels.json").read_text())
        dirs = sorted(p.name for p in root.iterdir() if p.is_dir())
        if not dirs:
            problems.append("no graph directories found")
        for gid in dirs:
            if gid not in label_map:
                problems.append(f"graph {gid}: no label entry")
            if not (root / gid / "edges.tsv").exists():
                problems.append(f"graph {gid}: missing edges.tsv")
    if problems:
        for p in problems:
            _log(f"LAYOUT ERROR: {p}")
        return 2

    dataset = load_dataset(root)
    stats = {}
    for g, lab in zip(dataset.graphs, dataset.labels):
        s = stats.setdefault(dataset.class_names[lab], {"count": 0, "nodes": [], "edges": []})
        s["count"] += 1
        s["nodes"].append(g.node_count)
        s["edges"].append(g.edge_count)
    for cls in sorted(stats):
        s = stats[cls]
        nodes, edges = s["nodes"], s["edges"]
        _log(
            f"{cls}: {s['count']} graphs | nodes max={max(nodes)} min={min(nodes)} "
            f"avg={np.mean(nodes):.1f} | edges max={max(edges)} min={min(edges)} "
            f"avg={np.mean(edges):.1f}"
        )
    return 0


def _per_graph_profiles(dataset, metric):
    return [density_profile(g, metric) for g in dataset.graphs]


def cmd_density(args):
    cfg = parse_run_config(args.config, _overrides(args))
    dataset = load_dataset(cfg["dataset_root"])
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    for gid, g in zip(dataset.graph_ids, dataset.graphs):
        profile = density_profile(g, cfg["density_metric"])
        write_density_csv(outdir / f"{gid}.density.csv", profile)
        if g.original_ids is not None:
            _atomic_write_text(
                outdir / f"{gid}.id_map.json",
                json.dumps({i: orig for i, orig in enumerate(g.original_ids)}),
            )
    _log(f"wrote density CSVs for {len(dataset)} graphs to {outdir}")
    return 0


def cmd_walk(args):
    cfg = parse_run_config(args.config, _overrides(args))
    dataset = load_dataset(cfg["dataset_root"])
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    wcfg = _walk_config(cfg)
    for gid, g in zip(dataset.graph_ids, dataset.graphs):
        profile = density_profile(g, cfg["density_metric"])
        corpus = generate_walks(g, profile, wcfg, graph_id=gid)
        corpus.write(outdir / f"{gid}.walks.txt")
    _log(f"wrote walks for {len(dataset)} graphs to {outdir}")
    return 0


def cmd_embed(args):
    cfg = parse_run_config(args.config, _overrides(args))
    dataset = load_dataset(cfg["dataset_root"])
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    wcfg, scfg = _walk_config(cfg), _sgns_config(cfg)
    for gid, g in zip(dataset.graph_ids, dataset.graphs):
        profile = density_profile(g, cfg["density_metric"])
        corpus = generate_walks(g, profile, wcfg, graph_id=gid)
        emb = train_sgns(corpus, g.node_count, scfg)
        emb.write_tsv(outdir / f"{gid}.emb.tsv")
    _log(f"wrote embeddings for {len(dataset)} graphs to {outdir}")
    return 0


def cmd_train(args):
    cfg = parse_run_config(args.config, _overrides(args))
    dataset = load_dataset(cfg["dataset_root"])
    if cfg.get("label_filter"):
        dataset = dataset.filter_classes(cfg["label_filter"])
    split = stratified_split(dataset, (0.8, 0.1, 0.1), cfg["seeds"][0])
    embs = None
    if cfg["input_mode"] in (InputMode.RWW, InputMode.NF_PLUS_RWW):
        embs = compute_embeddings(
            dataset, cfg["density_metric"], cfg["threshold_rule"],
            _walk_config(cfg), _sgns_config(cfg), log=_log,
        )
    inputs = [
        build_inputs(g, embs[i] if embs else None, cfg["input_mode"])
        for i, g in enumerate(dataset.graphs)
    ]
    mc = ModelConfig(
        variant=cfg["variants"][0], input_mode=cfg["input_mode"],
        hidden_dim=cfg["hidden_dims"][0], num_layers=cfg["num_layers"],
        learning_rate=cfg["learning_rates"][0], epochs=cfg["epochs"],
        patience=cfg["patience"], seed=cfg["seeds"][0],
    )
    model = train(mc, split, inputs)
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    save_model(model, outdir / "model.bin")
    log_lines = ["epoch,train_loss,val_loss"]
    log_lines += [f"{e},{tl!r},{vl!r}" for e, tl, vl in model.history]
    _atomic_write_text(outdir / "train_log.csv", "\n".join(log_lines) + "\n")
    _log(f"trained {mc.variant.value}; best epoch {model.best_epoch}; wrote {outdir / 'model.bin'}")
    return 0


def cmd_eval(args):
    cfg = parse_run_config(args.config, _overrides(args))
    dataset = load_dataset(cfg["dataset_root"])
    reports, failures = grid_sweep(dataset, _sweep_config(cfg), log=_log)
    write_reports(reports, failures, cfg["output_dir"])
    _log(f"wrote reports for {len(reports)} cells to {cfg['output_dir']}")
    return 0 if not failures else 2


def cmd_pipeline(args):
    cfg = parse_run_config(args.config, _overrides(args))
    dataset = load_dataset(cfg["dataset_root"])
    outdir = Path(cfg["output_dir"])
    cache_dir = outdir / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    scfg = _sweep_config(cfg)

    manifest = {"config": _config_echo(cfg), "stages": {}, "started": time.time()}
    embeddings_cache = {}
    for metric in scfg.density_metrics:
        for rule in scfg.threshold_rules:
            embs = []
            for gid, g in zip(dataset.graph_ids, dataset.graphs):
                key = _sha256(
                    g.content_bytes(), metric.value, rule.value,
                    repr(replace(scfg.walk, threshold_rule=rule)), repr(scfg.sgns),
                )
                emb_path = cache_dir / f"emb_{key}.tsv"
                stage_id = f"embed:{metric.value}:{rule.value}:{gid}"
                if emb_path.exists():
                    try:
                        emb = EmbeddingMatrix.read_tsv(emb_path)
                        _log(f"{stage_id}: cached")
                        manifest["stages"][stage_id] = {"key": key, "cached": True}
                        embs.append(emb)
                        continue
                    except Exception as exc:
                        _log(f"{stage_id}: cache corruption ({exc}), recomputing")
                try:
                    profile = density_profile(g, metric)
                    dkey = _sha256(g.content_bytes(), metric.value)
                    dpath = cache_dir / f"density_{dkey}.csv"
                    if not dpath.exists():
                        write_density_csv(dpath, profile)
                    corpus = generate_walks(
                        g, profile, replace(scfg.walk, threshold_rule=rule), graph_id=gid
                    )
                    wkey = _sha256(dkey, repr(replace(scfg.walk, threshold_rule=rule)))
                    wpath = cache_dir / f"walks_{wkey}.txt"
                    if not wpath.exists():
                        corpus.write(wpath)
                    emb = train_sgns(corpus, g.node_count, scfg.sgns)
                except Exception as exc:
                    raise StageError(f"stage embed failed on graph {gid}: {exc}") from exc
                emb.write_tsv(emb_path)
                manifest["stages"][stage_id] = {"key": key, "cached": False}
                embs.append(emb)
            embeddings_cache[(metric, rule)] = embs

    try:
        reports, failures = grid_sweep(dataset, scfg, embeddings_cache=embeddings_cache, log=_log)
    except Exception as exc:
        raise StageError(f"stage eval failed: {exc}") from exc
    write_reports(reports, failures, outdir)
    manifest["finished"] = time.time()
    manifest["report_cells"] = len(reports)
    manifest["failures"] = [{"cell": c, "error": str(e)} for c, e in failures]
    _atomic_write_text(outdir / "run_manifest.json", json.dumps(manifest, indent=1, sort_keys=True, default=str))
    _log(f"pipeline complete: {len(reports)} cells, {len(failures)} failures")
    return 0 if not failures else 2


def _config_echo(cfg):
    out = {}
    for k, v in cfg.items():
        if isinstance(v, (Metric, ThresholdRule, InputMode, Variant)):
            out[k] = v.value
        elif isinstance(v, tuple):
            out[k] = [x.value if hasattr(x, "value") else x for x in v]
        else:
            out[k] = v
    return out


def _overrides(args):
    keys = ("dataset_root", "output_dir", "density_metric", "threshold_rule",
            "input_mode", "task", "seeds", "walk_length", "sgns_dim", "sgns_epochs",
            "variants", "hidden_dims", "learning_rates", "epochs", "patience")
    out = {}
    for k in keys:
        if hasattr(args, k) and getattr(args, k) is not None:
            out[k] = getattr(args, k)
    if getattr(args, "seed", None) is not None:
        out["seeds"] = str(args.seed)
    return out


def _add_common(sp):
    sp.add_argument("--config", "-c", default=None, help="flat key=value run config file")
    sp.add_argument("--dataset-root", dest="dataset_root")
    sp.add_argument("--output-dir", dest="output_dir")
    sp.add_argument("--density-metric", dest="density_metric")
    sp.add_argument("--threshold-rule", dest="threshold_rule")
    sp.add_argument("--input-mode", dest="input_mode")
    sp.add_argument("--task", dest="task")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--seeds", dest="seeds")
    sp.add_argument("--jobs", type=int, default=1, help="reserved for parallel stages")
    sp.add_argument("--walk-length", dest="walk_length")
    sp.add_argument("--sgns-dim", dest="sgns_dim")
    sp.add_argument("--sgns-epochs", dest="sgns_epochs")
    sp.add_argument("--variants", dest="variants")
    sp.add_argument("--hidden-dims", dest="hidden_dims")
    sp.add_argument("--learning-rates", dest="learning_rates")
    sp.add_argument("--epochs", dest="epochs")
    sp.add_argument("--patience", dest="patience")


def build_parser():
    parser = argparse.ArgumentParser(prog="densewalk")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted-dense-core dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--min-nodes", type=int, default=80)
    p.add_argument("--max-nodes", type=int, default=120)
    p.add_argument("--core-fraction", type=float, default=0.3)
    p.add_argument("--intra-prob", type=float, default=0.5)
    p.add_argument("--background-prob", type=float, default=0.02)
    p.add_argument("--feature-dim", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="check dataset layout and print statistics")
    p.add_argument("dataset_root")
    p.set_defaults(func=cmd_validate)

    for name, func in (("density", cmd_density), ("walk", cmd_walk), ("embed", cmd_embed),
                       ("train", cmd_train), ("eval", cmd_eval), ("pipeline", cmd_pipeline)):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        _log(f"config error: {exc}")
        return 1
    except StageError as exc:
        _log(f"stage failure: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
