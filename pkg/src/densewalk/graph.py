"""Graph representation, dataset loading, and synthetic graph generation.

Engagement graphs arrive as directed multigraphs on disk; everything
downstream works on the simple undirected view, so edges are symmetrized,
deduplicated, and stripped of self-loops at construction time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPLITS = ("train", "val", "test")


class DatasetError(Exception):
    """Raised for malformed dataset directories or config violations."""


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected graph with contiguous 0-based node ids.

    adjacency[v] is a sorted int64 array of v's neighbors.  features, when
    present, is a (node_count, f) float array aligned with node ids.
    """

    node_count: int
    adjacency: tuple
    features: np.ndarray | None = None
    original_ids: tuple | None = None  # pre-remap ids, parallel to node index

    @classmethod
    def from_edges(cls, node_count, edges, features=None, original_ids=None):
        """Build a simple graph from an iterable of (u, v) pairs.

        Directions are discarded, duplicates collapse, self-loops drop.
        """
        neighbor_sets = [set() for _ in range(node_count)]
        for u, v in edges:
            if u == v:
                continue
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise DatasetError(
                    f"edge ({u}, {v}) references a node outside [0, {node_count})"
                )
            neighbor_sets[u].add(v)
            neighbor_sets[v].add(u)
        adjacency = tuple(
            np.array(sorted(s), dtype=np.int64) for s in neighbor_sets
        )
        return cls(
            node_count=node_count,
            adjacency=adjacency,
            features=features,
            original_ids=tuple(original_ids) if original_ids is not None else None,
        )

    @property
    def edge_count(self):
        return sum(len(a) for a in self.adjacency) // 2

    def edges(self):
        """Yield each undirected edge once as (u, v) with u < v."""
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u < v:
                    yield u, int(v)

    def degree(self, v):
        return len(self.adjacency[v])

    def validate(self):
        """Full-scan check of the simple-graph invariants."""
        if len(self.adjacency) != self.node_count:
            raise DatasetError("adjacency length does not match node_count")
        neighbor_sets = [set(a.tolist()) for a in self.adjacency]
        for u, nbrs in enumerate(self.adjacency):
            if len(neighbor_sets[u]) != len(nbrs):
                raise DatasetError(f"duplicate neighbors at node {u}")
            if u in neighbor_sets[u]:
                raise DatasetError(f"self-loop at node {u}")
            for v in nbrs:
                v = int(v)
                if not 0 <= v < self.node_count:
                    raise DatasetError(f"neighbor {v} of {u} out of range")
                if u not in neighbor_sets[v]:
                    raise DatasetError(f"asymmetric edge ({u}, {v})")
        if self.features is not None and self.features.shape[0] != self.node_count:
            raise DatasetError("feature matrix row count does not match node_count")

    def content_bytes(self):
        """Canonical byte serialization, used for cache keys and determinism checks."""
        parts = [str(self.node_count).encode()]
        for u, nbrs in enumerate(self.adjacency):
            parts.append(nbrs.tobytes())
        if self.features is not None:
            parts.append(np.ascontiguousarray(self.features, dtype=np.float64).tobytes())
        return b"|".join(parts)


@dataclass
class LabeledGraphSet:
    """A collection of labeled graphs with optional split assignments."""

    graphs: list
    labels: list
    class_names: list
    splits: list = field(default_factory=list)  # "train" | "val" | "test" per graph
    graph_ids: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.graphs) != len(self.labels):
            raise DatasetError("graphs and labels must have equal length")
        if self.splits and len(self.splits) != len(self.graphs):
            raise DatasetError("splits must align with graphs")
        for lab in self.labels:
            if not 0 <= lab < len(self.class_names):
                raise DatasetError(f"label {lab} out of range for {len(self.class_names)} classes")
        if not self.graph_ids:
            self.graph_ids = [str(i) for i in range(len(self.graphs))]

    def __len__(self):
        return len(self.graphs)

    def indices_of_split(self, split):
        if split not in SPLITS:
            raise DatasetError(f"unknown split {split!r}")
        return [i for i, s in enumerate(self.splits) if s == split]

    def filter_classes(self, keep_class_names):
        """Subset to the named classes, relabeling to the new class order."""
        keep = [c for c in keep_class_names if c in self.class_names]
        if not keep:
            raise DatasetError("no requested classes present in dataset")
        old_to_new = {self.class_names.index(c): i for i, c in enumerate(keep)}
        idx = [i for i, lab in enumerate(self.labels) if lab in old_to_new]
        return LabeledGraphSet(
            graphs=[self.graphs[i] for i in idx],
            labels=[old_to_new[self.labels[i]] for i in idx],
            class_names=keep,
            splits=[self.splits[i] for i in idx] if self.splits else [],
            graph_ids=[self.graph_ids[i] for i in idx],
        )


def _read_edges_file(path):
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'src<TAB>dst', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer node id in {line!r}")
            edges.append((u, v))
    return edges


def _read_features_file(path):
    """Parse features.csv -> dict original_node_id -> feature vector."""
    feats = {}
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if not cols or cols[0] != "node_id":
            raise DatasetError(f"{path}: header must start with 'node_id'")
        width = len(cols) - 1
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != width + 1:
                raise DatasetError(f"{path}:{lineno}: expected {width + 1} columns")
            try:
                nid = int(parts[0])
                vec = [float(x) for x in parts[1:]]
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: malformed row")
            feats[nid] = vec
    return feats


def load_graph_dir(graph_dir):
    """Load one graph directory (edges.tsv plus optional features.csv)."""
    graph_dir = Path(graph_dir)
    edges_path = graph_dir / "edges.tsv"
    if not edges_path.exists():
        raise DatasetError(f"graph {graph_dir.name}: missing edges.tsv")
    raw_edges = _read_edges_file(edges_path)

    edge_ids = sorted({u for e in raw_edges for u in e})
    features = None
    feat_path = graph_dir / "features.csv"
    feats = _read_features_file(feat_path) if feat_path.exists() else None

    if feats is not None:
        missing = [orig for orig in edge_ids if orig not in feats]
        if missing:
            raise DatasetError(
                f"graph {graph_dir.name}: node id {missing[0]} in edges.tsv "
                f"but absent from features.csv"
            )
        # isolated nodes live only in the features file; keep them
        original_ids = sorted(feats)
    else:
        original_ids = edge_ids
    remap = {orig: i for i, orig in enumerate(original_ids)}
    node_count = len(original_ids)

    if feats is not None:
        width = len(next(iter(feats.values()))) if feats else 0
        features = np.zeros((node_count, width), dtype=np.float64)
        for orig, i in remap.items():
            features[i] = feats[orig]

    edges = [(remap[u], remap[v]) for u, v in raw_edges]
    return Graph.from_edges(node_count, edges, features=features, original_ids=original_ids)


def load_dataset(root_path):
    """Load a dataset directory into a LabeledGraphSet.

    Layout: <root>/labels.json maps graph-id -> class-name; each graph
    lives in <root>/<graph-id>/edges.tsv with optional features.csv.
    """
    root = Path(root_path)
    labels_path = root / "labels.json"
    if not labels_path.exists():
        raise DatasetError(f"{root}: missing labels.json")
    with open(labels_path) as fh:
        label_map = json.load(fh)

    graph_dirs = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not graph_dirs:
        raise DatasetError(f"{root}: no graphs found")

    class_names = sorted(set(label_map.values()))
    class_index = {c: i for i, c in enumerate(class_names)}

    graphs, labels, ids = [], [], []
    for gid in graph_dirs:
        if gid not in label_map:
            raise DatasetError(f"graph {gid}: no label entry in labels.json")
        graphs.append(load_graph_dir(root / gid))
        labels.append(class_index[label_map[gid]])
        ids.append(gid)
    return LabeledGraphSet(graphs=graphs, labels=labels, class_names=class_names, graph_ids=ids)


def save_dataset(dataset, root_path):
    """Write a LabeledGraphSet in the on-disk layout load_dataset reads."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    label_map = {}
    for gid, g, lab in zip(dataset.graph_ids, dataset.graphs, dataset.labels):
        gdir = root / gid
        gdir.mkdir(exist_ok=True)
        with open(gdir / "edges.tsv", "w") as fh:
            for u, v in g.edges():
                fh.write(f"{u}\t{v}\n")
        if g.features is not None:
            width = g.features.shape[1]
            with open(gdir / "features.csv", "w") as fh:
                fh.write("node_id," + ",".join(f"f{i}" for i in range(width)) + "\n")
                for nid in range(g.node_count):
                    row = ",".join(repr(float(x)) for x in g.features[nid])
                    fh.write(f"{nid},{row}\n")
        label_map[gid] = dataset.class_names[lab]
    with open(root / "labels.json", "w") as fh:
        json.dump(label_map, fh, indent=1, sort_keys=True)


@dataclass(frozen=True)
class GeneratorConfig:
    """Settings for the planted-dense-core synthetic generator."""

    n_graphs_per_class: int
    node_count_range: tuple  # inclusive (lo, hi)
    dense_core_fraction: float
    intra_core_edge_prob: float
    background_edge_prob: float
    seed: int
    feature_dim: int = 0

    def validate(self):
        lo, hi = self.node_count_range
        if lo > hi or lo < 1:
            raise DatasetError(f"empty node_count_range {self.node_count_range}")
        if self.n_graphs_per_class < 1:
            raise DatasetError("n_graphs_per_class must be >= 1")
        if not 0.0 < self.dense_core_fraction <= 1.0:
            raise DatasetError("dense_core_fraction must be in (0, 1]")
        if not (0.0 <= self.background_edge_prob <= 1.0 and 0.0 <= self.intra_core_edge_prob <= 1.0):
            raise DatasetError("edge probabilities must be in [0, 1]")
        if self.intra_core_edge_prob <= self.background_edge_prob:
            raise DatasetError(
                "intra_core_edge_prob must exceed background_edge_prob "
                "(classes must be density-separable)"
            )


def sample_er_edges(nodes, p, rng):
    """Sample Erdos-Renyi edges among `nodes` (array of ids) with probability p.

    Draws the edge count from Binomial(C(n,2), p) and fills with rejection
    sampling, so it stays cheap for large sparse graphs.
    """
    n = len(nodes)
    n_pairs = n * (n - 1) // 2
    if n_pairs == 0 or p <= 0.0:
        return set()
    m = int(rng.binomial(n_pairs, p))
    chosen = set()
    while len(chosen) < m:
        k = m - len(chosen)
        us = rng.integers(0, n, size=2 * k + 8)
        vs = rng.integers(0, n, size=2 * k + 8)
        for u, v in zip(us, vs):
            if u == v:
                continue
            a, b = (u, v) if u < v else (v, u)
            chosen.add((int(nodes[a]), int(nodes[b])))
            if len(chosen) >= m:
                break
    return chosen


def generate_synthetic(cfg):
    """Generate a two-class set: background graphs vs planted-dense-core graphs.

    Class 1 graphs carry an ER core on dense_core_fraction of their nodes
    at intra_core_edge_prob plus background noise; class 0 graphs are
    pure background.  Bit-reproducible for a fixed seed.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.node_count_range
    graphs, labels, ids = [], [], []
    for cls in (0, 1):
        for i in range(cfg.n_graphs_per_class):
            n = int(rng.integers(lo, hi + 1))
            all_nodes = np.arange(n)
            edges = sample_er_edges(all_nodes, cfg.background_edge_prob, rng)
            if cls == 1:
                core_size = max(2, round(cfg.dense_core_fraction * n))
                core_nodes = rng.permutation(n)[:core_size]
                edges |= sample_er_edges(np.sort(core_nodes), cfg.intra_core_edge_prob, rng)
            features = None
            if cfg.feature_dim > 0:
                features = rng.standard_normal((n, cfg.feature_dim))
            graphs.append(Graph.from_edges(n, edges, features=features))
            labels.append(cls)
            ids.append(f"c{cls}_g{i:04d}")
    class_names = ["background", "planted"]
    return LabeledGraphSet(graphs=graphs, labels=labels, class_names=class_names, graph_ids=ids)


def stratified_split(dataset, fractions, seed):
    """Assign train/val/test splits stratified by class.

    Per-class proportions match `fractions` within one graph; the multiset
    of (graph, label) pairs is untouched.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise DatasetError("fractions must be three positive reals")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DatasetError(f"fractions must sum to 1, got {sum(fractions)}")

    by_class = {}
    for i, lab in enumerate(dataset.labels):
        by_class.setdefault(lab, []).append(i)
    for lab, idx in by_class.items():
        if len(idx) < len(SPLITS):
            raise DatasetError(
                f"class {dataset.class_names[lab]!r} has {len(idx)} graphs, "
                f"fewer than the {len(SPLITS)} splits"
            )

    rng = np.random.default_rng(seed)
    splits = [None] * len(dataset)
    for lab in sorted(by_class):
        idx = np.array(by_class[lab])
        idx = idx[rng.permutation(len(idx))]
        n = len(idx)
        exact = [f * n for f in fractions]
        counts = [math.floor(e) for e in exact]
        # Largest-remainder rounding, then steal from the biggest split so
        # every split gets at least one graph.
        remainders = sorted(range(3), key=lambda j: exact[j] - counts[j], reverse=True)
        for j in remainders[: n - sum(counts)]:
            counts[j] += 1
        for j in range(3):
            if counts[j] == 0:
                donor = max(range(3), key=lambda k: counts[k])
                counts[donor] -= 1
                counts[j] += 1
        pos = 0
        for split_name, c in zip(SPLITS, counts):
            for i in idx[pos : pos + c]:
                splits[int(i)] = split_name
            pos += c
    return LabeledGraphSet(
        graphs=dataset.graphs,
        labels=dataset.labels,
        class_names=dataset.class_names,
        splits=splits,
        graph_ids=dataset.graph_ids,
    )
