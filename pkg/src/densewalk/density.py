"""Local density metrics: degree, core number, truss number, and normalization.

Core numbers use bucket-based minimum-degree peeling (linear in edges).
Truss numbers use triangle-support counting plus minimum-support edge
peeling.  Ties always break toward the smallest node/edge id so results
are deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Metric(str, Enum):
    DEGREE = "degree"
    CORE = "core"
    TRUSS = "truss"


@dataclass(frozen=True)
class DensityProfile:
    """Raw and [0,1]-normalized per-node density values for one metric."""

    metric: Metric
    raw: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        if self.raw.shape != self.phi.shape:
            raise ValueError("raw and phi must have equal length")
        if len(self.phi) and (self.phi.min() < 0.0 or self.phi.max() > 1.0):
            raise ValueError("phi values must lie in [0, 1]")


@dataclass(frozen=True)
class EdgeTruss:
    """Truss numbers per undirected edge (u, v), u < v."""

    edge_u: np.ndarray
    edge_v: np.ndarray
    truss: np.ndarray

    def as_dict(self):
        return {
            (int(u), int(v)): int(t)
            for u, v, t in zip(self.edge_u, self.edge_v, self.truss)
        }


def degrees(g):
    """Number of edges incident to each node."""
    return np.array([len(a) for a in g.adjacency], dtype=np.int64)


def core_numbers(g):
    """Core number per node via minimum-degree bucket peeling.

    O(|E|) once the initial bucket sort is done; nodes of equal degree are
    peeled in increasing id order.
    """
    n = g.node_count
    deg = degrees(g)
    core = np.zeros(n, dtype=np.int64)
    if n == 0:
        return core

    # Batagelj-Zaversnik: nodes sorted by (degree, id), positions tracked
    # so a degree decrement is a swap into the bucket boundary.
    order = sorted(range(n), key=lambda v: (deg[v], v))
    pos = [0] * n
    for i, v in enumerate(order):
        pos[v] = i
    max_deg = int(deg.max()) if n else 0
    bin_start = [0] * (max_deg + 2)
    for v in range(n):
        bin_start[deg[v] + 1] += 1
    for d in range(1, max_deg + 2):
        bin_start[d] += bin_start[d - 1]
    bin_ptr = bin_start[:]  # start index of each degree bucket, mutated as we peel

    cur_deg = deg.copy()
    removed = [False] * n
    for i in range(n):
        v = order[i]
        core[v] = cur_deg[v]
        removed[v] = True
        bin_ptr[cur_deg[v]] = i + 1
        for u in g.adjacency[v]:
            u = int(u)
            if removed[u] or cur_deg[u] <= cur_deg[v]:
                continue
            du = cur_deg[u]
            pu = pos[u]
            pw = max(bin_ptr[du], i + 1)
            w = order[pw]
            if u != w:
                order[pu], order[pw] = w, u
                pos[u], pos[w] = pw, pu
            bin_ptr[du] = pw + 1
            cur_deg[u] -= 1
    return core


def _edge_index(g):
    """Canonical edge arrays (u < v, lexicographic) and a lookup dict."""
    eu, ev = [], []
    for u, v in g.edges():
        eu.append(u)
        ev.append(v)
    eu = np.array(eu, dtype=np.int64)
    ev = np.array(ev, dtype=np.int64)
    eid = {(int(u), int(v)): i for i, (u, v) in enumerate(zip(eu, ev))}
    return eu, ev, eid


def edge_truss_numbers(g):
    """Truss number per edge via support counting and min-support peeling.

    Every edge has truss >= 2; an edge in t triangles starts with support
    t.  Peeling uses a lazy heap keyed by (support, edge id).
    """
    eu, ev, eid = _edge_index(g)
    m = len(eu)
    truss = np.full(m, 2, dtype=np.int64)
    if m == 0:
        return EdgeTruss(edge_u=eu, edge_v=ev, truss=truss)

    adj_sets = [set(a.tolist()) for a in g.adjacency]
    support = np.zeros(m, dtype=np.int64)
    for i in range(m):
        u, v = int(eu[i]), int(ev[i])
        a, b = g.adjacency[u], g.adjacency[v]
        if len(a) > len(b):
            a, b = b, a
        support[i] = len(np.intersect1d(a, b, assume_unique=True)) if len(a) else 0

    def ekey(a, b):
        return (a, b) if a < b else (b, a)

    heap = [(int(support[i]), i) for i in range(m)]
    heapq.heapify(heap)
    alive = [True] * m
    k = 2
    processed = 0
    while processed < m:
        s, i = heapq.heappop(heap)
        if not alive[i] or s != support[i]:
            continue  # stale heap entry
        alive[i] = False
        processed += 1
        k = max(k, s + 2)
        truss[i] = k
        u, v = int(eu[i]), int(ev[i])
        adj_sets[u].discard(v)
        adj_sets[v].discard(u)
        small, big = (u, v) if len(adj_sets[u]) <= len(adj_sets[v]) else (v, u)
        for w in adj_sets[small]:
            if w not in adj_sets[big]:
                continue
            for e2 in (eid[ekey(u, w)], eid[ekey(v, w)]):
                if alive[e2]:
                    support[e2] -= 1
                    heapq.heappush(heap, (int(support[e2]), e2))
    return EdgeTruss(edge_u=eu, edge_v=ev, truss=truss)


def node_truss_numbers(g, et, truss_offset=False):
    """Average incident-edge truss per node; isolated nodes get 0.

    truss_offset subtracts 2 from each edge truss before averaging, for
    comparison against conventions that count triangles instead of k.
    """
    sums = np.zeros(g.node_count, dtype=np.float64)
    counts = np.zeros(g.node_count, dtype=np.int64)
    vals = et.truss.astype(np.float64)
    if truss_offset:
        vals = vals - 2.0
    for u, v, t in zip(et.edge_u, et.edge_v, vals):
        sums[u] += t
        sums[v] += t
        counts[u] += 1
        counts[v] += 1
    out = np.zeros(g.node_count, dtype=np.float64)
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz]
    return out


def normalize(raw):
    """Per-graph min-max scaling into [0,1]; all-equal input maps to 0.5."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size < 1:
        raise ValueError("cannot normalize an empty vector")
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.full(raw.shape, 0.5)
    return (raw - lo) / (hi - lo)


def density_profile(g, metric, truss_offset=False):
    """Compute the chosen density metric and its normalized form."""
    metric = Metric(metric)
    if metric is Metric.DEGREE:
        raw = degrees(g).astype(np.float64)
    elif metric is Metric.CORE:
        raw = core_numbers(g).astype(np.float64)
    else:
        raw = node_truss_numbers(g, edge_truss_numbers(g), truss_offset=truss_offset)
    return DensityProfile(metric=metric, raw=raw, phi=normalize(raw))


def write_density_csv(path, profile):
    """Write `node_id,raw,phi` rows for one graph."""
    with open(path, "w") as fh:
        fh.write("node_id,raw,phi\n")
        for i, (r, p) in enumerate(zip(profile.raw, profile.phi)):
            fh.write(f"{i},{r!r},{p!r}\n")
