import numpy as np
import pytest

from densewalk.density import DensityProfile, Metric, density_profile
from densewalk.graph import Graph
from densewalk.walks import (
    ThresholdRule,
    WalkConfig,
    WalkCorpus,
    generate_walks,
    resolve_threshold,
    transition_distribution,
)


def profile_of(phi):
    phi = np.asarray(phi, dtype=np.float64)
    return DensityProfile(metric=Metric.DEGREE, raw=phi.copy(), phi=phi)


class TestResolveThreshold:
    PHI = [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_median(self):
        assert resolve_threshold(profile_of(self.PHI), "median") == 0.5

    def test_median_even_count(self):
        assert resolve_threshold(profile_of([0.0, 0.2, 0.6, 1.0]), "median") == pytest.approx(0.4)

    def test_midpoint(self):
        assert resolve_threshold(profile_of(self.PHI), "midpoint") == 0.5

    def test_fixed_half(self):
        assert resolve_threshold(profile_of([0.9, 0.95]), "fixed_half") == 0.5


class TestTransitionDistribution:
    def test_high_density_branch(self):
        # current node denser than tau: weights are neighbor phis directly
        g = Graph.from_edges(3, [(0, 1), (0, 2)])
        prof = profile_of([0.9, 0.2, 0.8])
        nbrs, p = transition_distribution(g, prof, 0, 0.5)
        np.testing.assert_allclose(p, [0.2, 0.8])

    def test_low_density_branch_inverts(self):
        g = Graph.from_edges(3, [(0, 1), (0, 2)])
        prof = profile_of([0.3, 0.2, 0.8])
        nbrs, p = transition_distribution(g, prof, 0, 0.5)
        np.testing.assert_allclose(p, [0.8, 0.2])

    def test_equality_takes_low_branch(self):
        g = Graph.from_edges(3, [(0, 1), (0, 2)])
        prof = profile_of([0.5, 0.25, 0.75])
        _, p = transition_distribution(g, prof, 0, 0.5)
        np.testing.assert_allclose(p, [0.75, 0.25])

    def test_zero_weight_fallback_uniform(self):
        g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
        prof = profile_of([0.9, 0.0, 0.0, 0.0])
        _, p = transition_distribution(g, prof, 0, 0.5)
        np.testing.assert_allclose(p, [1 / 3] * 3)

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        g = Graph.from_edges(6, [(0, i) for i in range(1, 6)])
        for _ in range(20):
            prof = profile_of(rng.random(6))
            _, p = transition_distribution(g, prof, 0, rng.random())
            assert abs(p.sum() - 1.0) < 1e-12

    def test_isolated_node_errors(self):
        g = Graph.from_edges(2, [])
        with pytest.raises(ValueError):
            transition_distribution(g, profile_of([0.5, 0.5]), 0, 0.5)


class TestGenerateWalks:
    def test_forced_path(self):
        g = Graph.from_edges(2, [(0, 1)])
        prof = profile_of([0.2, 0.8])
        corpus = generate_walks(g, prof, WalkConfig(walk_length=3, seed=1))
        assert corpus.walks[0].tolist() == [0, 1, 0, 1]
        assert corpus.walks[1].tolist() == [1, 0, 1, 0]

    def test_isolated_seed_short_walk(self):
        g = Graph.from_edges(2, [])
        prof = profile_of([0.5, 0.5])
        corpus = generate_walks(g, prof, WalkConfig(walk_length=5, seed=1))
        assert [w.tolist() for w in corpus.walks] == [[0], [1]]

    def test_every_step_is_an_edge(self):
        rng = np.random.default_rng(3)
        edges = [(i, j) for i in range(20) for j in range(i + 1, 20) if rng.random() < 0.2]
        g = Graph.from_edges(20, edges)
        prof = density_profile(g, "degree")
        corpus = generate_walks(g, prof, WalkConfig(walk_length=30, seed=5, walks_per_node=2))
        edge_set = {(u, v) for u, v in g.edges()} | {(v, u) for u, v in g.edges()}
        for w in corpus.walks:
            assert w[0] in range(20)
            for a, b in zip(w, w[1:]):
                assert (int(a), int(b)) in edge_set

    def test_walk_count_and_seeds(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        prof = density_profile(g, "degree")
        corpus = generate_walks(g, prof, WalkConfig(walk_length=4, seed=0, walks_per_node=3))
        assert len(corpus) == 12
        assert [int(w[0]) for w in corpus.walks] == [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]

    def test_deterministic_bytes(self):
        rng = np.random.default_rng(8)
        edges = [(i, j) for i in range(15) for j in range(i + 1, 15) if rng.random() < 0.3]
        g = Graph.from_edges(15, edges)
        prof = density_profile(g, "core")
        cfg = WalkConfig(walk_length=25, seed=123, threshold_rule=ThresholdRule.MEDIAN)
        a = generate_walks(g, prof, cfg)
        b = generate_walks(g, prof, cfg)
        assert a.content_bytes() == b.content_bytes()

    def test_star_first_step_binomial(self, star4):
        # equal leaf phis: each leaf should be the first step 1/4 of the time
        prof = profile_of([1.0, 0.4, 0.4, 0.4, 0.4])
        corpus = generate_walks(
            star4, prof, WalkConfig(walk_length=1, seed=99, walks_per_node=2000)
        )
        first = [int(w[1]) for w in corpus.walks if int(w[0]) == 0]
        n = len(first)
        assert n == 2000
        sigma = np.sqrt(n * 0.25 * 0.75)
        for leaf in (1, 2, 3, 4):
            count = sum(1 for x in first if x == leaf)
            assert abs(count - n * 0.25) <= 3 * sigma

    def test_dense_seed_prefers_dense_region(self, barbell):
        prof = density_profile(barbell, "degree")
        cfg = WalkConfig(walk_length=30, seed=7, threshold_rule=ThresholdRule.MEDIAN, walks_per_node=4)
        corpus = generate_walks(barbell, prof, cfg)
        clique = set(range(0, 5)) | set(range(10, 15))
        visited_phi = []
        for w in corpus.walks:
            if int(w[0]) in clique:
                visited_phi.extend(prof.phi[int(x)] for x in w)
        assert np.mean(visited_phi) > prof.phi.mean()

    def test_corpus_file_roundtrip(self, tmp_path, star4):
        prof = density_profile(star4, "degree")
        corpus = generate_walks(star4, prof, WalkConfig(walk_length=5, seed=2))
        corpus.write(tmp_path / "w.txt")
        back = WalkCorpus.read(tmp_path / "w.txt")
        assert back.content_bytes() == corpus.content_bytes()
