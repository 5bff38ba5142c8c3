import numpy as np
import pytest

from densewalk.graph import Graph

# Verdict lines recorded by the acceptance tests; echoed after the run so
# they survive output capture.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def star4():
    # center 0, four leaves
    return Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])


@pytest.fixture
def k4():
    return Graph.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])


@pytest.fixture
def triangle_pendant():
    # triangle {0,1,2} plus pendant node 3 attached to corner 2
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)])


@pytest.fixture
def barbell():
    # two K5s joined by a 3-node path: 0-4 clique, 10-14 clique, path 4-5-6-7-10
    edges = []
    for block in (range(0, 5), range(10, 15)):
        block = list(block)
        edges += [(a, b) for i, a in enumerate(block) for b in block[i + 1 :]]
    edges += [(4, 5), (5, 6), (6, 7), (7, 10)]
    return Graph.from_edges(15, edges)


def random_graph(n, p, rng):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)


def brute_force_core(g):
    """Independent oracle: repeated min-degree deletion, recording thresholds."""
    core = {}
    adj = {v: set(map(int, g.adjacency[v])) for v in range(g.node_count)}
    alive = set(range(g.node_count))
    k = 0
    while alive:
        k = max(k, min(len(adj[v]) for v in alive))
        victims = [v for v in alive if len(adj[v]) <= k]
        for v in victims:
            core[v] = k
            alive.discard(v)
            for u in adj[v]:
                adj[u].discard(v)
            adj[v] = set()
    return np.array([core[v] for v in range(g.node_count)], dtype=np.int64)


def brute_force_truss(g):
    """Independent oracle: for each k, repeatedly delete edges with support
    below k-2, recomputing supports from scratch each round."""
    edges = list(g.edges())
    result = {e: 2 for e in edges}
    survivors = set(edges)
    k = 3
    while survivors:
        sub = set(survivors)
        while True:
            adj = {}
            for u, v in sub:
                adj.setdefault(u, set()).add(v)
                adj.setdefault(v, set()).add(u)
            doomed = [e for e in sub if len(adj[e[0]] & adj[e[1]]) < k - 2]
            if not doomed:
                break
            sub.difference_update(doomed)
        for e in sub:
            result[e] = k
        survivors = sub
        k += 1
    return result
