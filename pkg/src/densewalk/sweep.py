"""Hyperparameter grid sweep and report emission.

One sweep cell is (density metric, threshold rule, input mode, variant).
Within a cell every (hidden_dim, learning_rate) combination is trained on
each seed; the combination with the best mean validation accuracy wins
and its test metrics are reported as mean +/- population std over seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .density import Metric, density_profile
from .graph import stratified_split
from .metrics import MetricsReport, accuracy, confusion_matrix, f1_binary, macro_f1, roc_auc
from .mpnn import (
    HIDDEN_GRID,
    LR_GRID,
    InputMode,
    ModelConfig,
    Variant,
    build_inputs,
    forward,
    GraphOps,
    train,
)
from .sgns import SgnsConfig, train_sgns
from .walks import ThresholdRule, WalkConfig, generate_walks


@dataclass
class SweepConfig:
    task: str = "binary"  # "binary" | "multiclass"
    density_metrics: tuple = (Metric.DEGREE,)
    threshold_rules: tuple = (ThresholdRule.FIXED_HALF,)
    input_modes: tuple = (InputMode.RWW,)
    variants: tuple = tuple(Variant)
    hidden_dims: tuple = HIDDEN_GRID
    learning_rates: tuple = LR_GRID
    seeds: tuple = (1, 2, 3)
    split_fractions: tuple = (0.8, 0.1, 0.1)
    walk: WalkConfig = field(default_factory=WalkConfig)
    sgns: SgnsConfig = field(default_factory=SgnsConfig)
    num_layers: int = 2
    epochs: int = 200
    patience: int = 20
    label_filter: tuple = ()  # class names to keep, empty = all


def cell_key(metric, rule, mode, variant):
    return f"{Metric(metric).value}-{ThresholdRule(rule).value}-{InputMode(mode).value}-{Variant(variant).value}"


def compute_embeddings(dataset, metric, rule, walk_cfg, sgns_cfg, log=None):
    """Walk + SGNS embeddings for every graph under one (metric, rule)."""
    walk_cfg = replace(walk_cfg, threshold_rule=ThresholdRule(rule))
    embs = []
    for gid, g in zip(dataset.graph_ids, dataset.graphs):
        profile = density_profile(g, metric)
        corpus = generate_walks(g, profile, walk_cfg, graph_id=gid)
        embs.append(train_sgns(corpus, g.node_count, sgns_cfg))
        if log:
            log(f"embedded {gid} ({metric}/{ThresholdRule(rule).value})")
    return embs


def _needs_embeddings(mode):
    return InputMode(mode) in (InputMode.RWW, InputMode.NF_PLUS_RWW)


def grid_sweep(dataset, cfg, embeddings_cache=None, log=None):
    """Run the full sweep; returns (reports, failures).

    embeddings_cache maps (metric, rule) -> list of EmbeddingMatrix and is
    filled on demand; pass a dict to reuse across calls.
    failures is a list of (cell key, exception) for cells that errored.
    """
    if cfg.label_filter:
        dataset = dataset.filter_classes(list(cfg.label_filter))
    if embeddings_cache is None:
        embeddings_cache = {}
    n_classes = len(dataset.class_names)
    splits = {s: stratified_split(dataset, cfg.split_fractions, s) for s in cfg.seeds}

    reports, failures = [], []
    for metric in cfg.density_metrics:
        for rule in cfg.threshold_rules:
            key = (Metric(metric), ThresholdRule(rule))
            for mode in cfg.input_modes:
                if _needs_embeddings(mode) and key not in embeddings_cache:
                    embeddings_cache[key] = compute_embeddings(
                        dataset, key[0], key[1], cfg.walk, cfg.sgns, log=log
                    )
                embs = embeddings_cache.get(key)
                try:
                    inputs = [
                        build_inputs(g, embs[i] if embs else None, mode)
                        for i, g in enumerate(dataset.graphs)
                    ]
                except ValueError as exc:
                    failures.append((f"{Metric(metric).value}-{ThresholdRule(rule).value}-{InputMode(mode).value}", exc))
                    continue
                for variant in cfg.variants:
                    ck = cell_key(metric, rule, mode, variant)
                    try:
                        reports.append(
                            _run_cell(dataset, splits, inputs, cfg, metric, rule, mode, variant, n_classes, log)
                        )
                        if log:
                            log(f"cell {ck} done")
                    except Exception as exc:  # keep sweeping remaining cells
                        failures.append((ck, exc))
                        if log:
                            log(f"cell {ck} FAILED: {exc}")
    return reports, failures


def _run_cell(dataset, splits, inputs, cfg, metric, rule, mode, variant, n_classes, log):
    # model selection: best mean validation accuracy, ties by lower lr
    # then smaller hidden
    best = None
    for hidden in cfg.hidden_dims:
        for lr in cfg.learning_rates:
            val_accs = []
            models = []
            for seed in cfg.seeds:
                mc = ModelConfig(
                    variant=Variant(variant), input_mode=InputMode(mode),
                    hidden_dim=hidden, num_layers=cfg.num_layers, learning_rate=lr,
                    epochs=cfg.epochs, patience=cfg.patience, seed=seed,
                )
                model = train(mc, splits[seed], inputs)
                data = splits[seed]
                vi = data.indices_of_split("val")
                preds = [
                    int(np.argmax(forward(model, GraphOps(data.graphs[i]), inputs[i]))) for i in vi
                ]
                val_accs.append(accuracy(preds, [data.labels[i] for i in vi]))
                models.append(model)
            mean_val = float(np.mean(val_accs))
            cand = (mean_val, -lr, -hidden, lr, hidden, models)
            if best is None or (cand[0], cand[1], cand[2]) > (best[0], best[1], best[2]):
                best = cand

    _, _, _, lr, hidden, models = best
    accs, f1s = [], []
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    all_scores, all_labels = [], []
    for seed, model in zip(cfg.seeds, models):
        data = splits[seed]
        ti = data.indices_of_split("test")
        labels = [data.labels[i] for i in ti]
        probs = [forward(model, GraphOps(data.graphs[i]), inputs[i]) for i in ti]
        preds = [int(np.argmax(p)) for p in probs]
        accs.append(accuracy(preds, labels))
        if cfg.task == "binary":
            f1s.append(f1_binary(preds, labels, positive_class=1))
            all_scores.extend(p[1] for p in probs)
            all_labels.extend(labels)
        else:
            f1s.append(macro_f1(preds, labels, n_classes))
        confusion += confusion_matrix(preds, labels, n_classes)

    roc_points, auc = [], None
    if cfg.task == "binary" and len(set(all_labels)) == 2:
        roc_points, auc = roc_auc(all_scores, all_labels)
    return MetricsReport(
        task=cfg.task,
        config={
            "variant": Variant(variant).value,
            "density_metric": Metric(metric).value,
            "threshold_rule": ThresholdRule(rule).value,
            "input_mode": InputMode(mode).value,
            "hidden_dim": hidden,
            "learning_rate": lr,
            "seeds": list(cfg.seeds),
        },
        accuracy_mean=float(np.mean(accs)),
        accuracy_std=float(np.std(accs)),
        f1_mean=float(np.mean(f1s)),
        f1_std=float(np.std(f1s)),
        confusion=confusion,
        roc_points=roc_points,
        auc=auc,
    )


def write_reports(reports, failures, outdir):
    """Emit report.json, per-cell ROC/confusion CSVs, and summary.md."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "reports": [r.to_dict() for r in reports],
        "failures": [{"cell": c, "error": str(e)} for c, e in failures],
    }
    with open(outdir / "report.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)

    for r in reports:
        c = r.config
        ck = cell_key(c["density_metric"], c["threshold_rule"], c["input_mode"], c["variant"])
        if r.roc_points:
            with open(outdir / f"roc_{ck}.csv", "w") as fh:
                fh.write("fpr,tpr\n")
                for fpr, tpr in r.roc_points:
                    fh.write(f"{fpr!r},{tpr!r}\n")
        with open(outdir / f"confusion_{ck}.csv", "w") as fh:
            for row in r.confusion:
                fh.write(",".join(str(int(x)) for x in row) + "\n")

    with open(outdir / "summary.md", "w") as fh:
        fh.write(_summary_md(reports))


def _summary_md(reports):
    if not reports:
        return "(no completed cells)\n"
    metrics = sorted({r.config["density_metric"] for r in reports})
    lines = []
    task = reports[0].task
    score_name = "F1" if task == "binary" else "Macro-F1"
    lines.append(f"# Sweep summary ({task})\n")
    for table_name, fld in (("Accuracy", "accuracy"), ((score_name), "f1")):
        lines.append(f"\n## {table_name}\n")
        header = "| Model | Input | " + " | ".join(f"{m} (tau / value)" for m in metrics) + " |"
        lines.append(header)
        lines.append("|" + "---|" * (2 + len(metrics)))
        combos = sorted({(r.config["variant"], r.config["input_mode"]) for r in reports})
        for variant, mode in combos:
            row = [variant.upper(), mode]
            for m in metrics:
                cell = [
                    r for r in reports
                    if r.config["variant"] == variant and r.config["input_mode"] == mode
                    and r.config["density_metric"] == m
                ]
                if not cell:
                    row.append("-")
                    continue
                r = max(cell, key=lambda r: getattr(r, f"{fld}_mean"))
                mean = getattr(r, f"{fld}_mean")
                std = getattr(r, f"{fld}_std")
                row.append(f"{r.config['threshold_rule']} / {mean:.3f} ± {std:.3f}")
            lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    return "\n".join(lines)
