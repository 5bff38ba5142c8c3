"""Density-aware random weighted walk generation.

Each step samples the next node from the current node's neighbors with
weights phi(u) when the current node is denser than the threshold, and
1 - phi(u) otherwise, renormalized.  Every node seeds walks_per_node
walks; each walk draws from its own counter-based RNG stream so corpus
bytes are independent of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class ThresholdRule(str, Enum):
    FIXED_HALF = "fixed_half"
    MEDIAN = "median"
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class WalkConfig:
    walk_length: int = 100
    threshold_rule: ThresholdRule = ThresholdRule.FIXED_HALF
    walks_per_node: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.walk_length < 1:
            raise ValueError("walk_length must be >= 1")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")


@dataclass(frozen=True)
class WalkCorpus:
    walks: tuple  # tuple of int64 arrays
    graph_id: str = ""

    def __len__(self):
        return len(self.walks)

    def content_bytes(self):
        return b"\n".join(w.tobytes() for w in self.walks)

    def write(self, path):
        with open(path, "w") as fh:
            for w in self.walks:
                fh.write(" ".join(str(int(x)) for x in w) + "\n")

    @classmethod
    def read(cls, path, graph_id=""):
        walks = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    walks.append(np.array([int(x) for x in line.split()], dtype=np.int64))
        return cls(walks=tuple(walks), graph_id=graph_id)


def resolve_threshold(profile, rule):
    """Map a threshold rule to a scalar tau over the profile's phi values."""
    rule = ThresholdRule(rule)
    phi = profile.phi
    if phi.size == 0:
        raise ValueError("profile is empty")
    if rule is ThresholdRule.FIXED_HALF:
        return 0.5
    if rule is ThresholdRule.MEDIAN:
        return float(np.median(phi))
    return float((phi.min() + phi.max()) / 2.0)


def transition_distribution(g, profile, v, tau):
    """Per-neighbor sampling probabilities for the next step from v.

    Strict comparison: phi(v) > tau takes the high-density branch
    (weights phi(u)); equality takes the low-density branch (1 - phi(u)).
    All-zero weights fall back to uniform.
    """
    nbrs = g.adjacency[v]
    if len(nbrs) == 0:
        raise ValueError(f"node {v} is isolated; no transition distribution")
    phi = profile.phi
    if phi[v] > tau:
        w = phi[nbrs]
    else:
        w = 1.0 - phi[nbrs]
    total = w.sum()
    if total <= 0.0:
        return nbrs, np.full(len(nbrs), 1.0 / len(nbrs))
    return nbrs, w / total


def _cumulative_tables(g, profile, tau):
    """Per-node cumulative transition probabilities (None for isolated nodes)."""
    tables = []
    for v in range(g.node_count):
        if len(g.adjacency[v]) == 0:
            tables.append(None)
            continue
        _, p = transition_distribution(g, profile, v, tau)
        tables.append(np.cumsum(p))
    return tables


def _walk_rng(seed, node, walk_idx):
    # One stream per (seed node, walk index): reproducible no matter the
    # order walks are generated in.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(node, walk_idx)))


def generate_walks(g, profile, cfg, graph_id=""):
    """Run the weighted-walk procedure from every node.

    A walk stops early when it reaches a node with no neighbors; isolated
    seeds produce length-1 walks.
    """
    if len(profile.phi) != g.node_count:
        raise ValueError("profile does not match graph")
    tau = resolve_threshold(profile, cfg.threshold_rule)
    cum = _cumulative_tables(g, profile, tau)

    walks = []
    for v in range(g.node_count):
        for j in range(cfg.walks_per_node):
            rng = _walk_rng(cfg.seed, v, j)
            walk = [v]
            cur = v
            for _ in range(cfg.walk_length):
                table = cum[cur]
                if table is None:
                    break
                idx = int(np.searchsorted(table, rng.random(), side="right"))
                idx = min(idx, len(table) - 1)  # guard fp edge at 1.0
                cur = int(g.adjacency[cur][idx])
                walk.append(cur)
            walks.append(np.array(walk, dtype=np.int64))
    return WalkCorpus(walks=tuple(walks), graph_id=graph_id)
