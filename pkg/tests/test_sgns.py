import math

import numpy as np
import pytest

from densewalk.density import density_profile
from densewalk.sgns import (
    EmbeddingMatrix,
    SgnsConfig,
    batch_loss_and_grads,
    extract_pairs,
    gradient_check_sgns,
    pair_loss,
    train_sgns,
)
from densewalk.walks import WalkConfig, WalkCorpus, generate_walks


def corpus_of(*walks):
    return WalkCorpus(walks=tuple(np.array(w, dtype=np.int64) for w in walks))


class TestExtractPairs:
    def test_window_around_center(self):
        pairs = extract_pairs(corpus_of([0, 1, 2, 3, 4]), 2)
        centered_on_2 = sorted(c for w, c in pairs if w == 2)
        assert centered_on_2 == [0, 1, 3, 4]

    def test_boundary_truncation(self):
        pairs = extract_pairs(corpus_of([7, 9]), 2)
        assert sorted(map(tuple, pairs)) == [(7, 9), (9, 7)]

    def test_single_node_walk_no_pairs(self):
        assert len(extract_pairs(corpus_of([3]), 2)) == 0

    def test_pair_count_formula(self):
        # single walk of length n >= 2r+1: 2*(r*n - r*(r+1)/2) pairs
        for n, r in ((10, 2), (7, 3), (5, 1)):
            pairs = extract_pairs(corpus_of(list(range(n))), r)
            assert len(pairs) == 2 * (r * n - r * (r + 1) // 2)


class TestLossAlgebra:
    def test_zero_dot_positive_loss_is_ln2(self):
        w_in = np.zeros((2, 4))
        w_out = np.zeros((2, 4))
        loss = pair_loss(w_in, w_out, 0, 1, [])
        assert loss == pytest.approx(math.log(2))

    def test_zero_vectors_gradient_is_half_paired_vector(self):
        # at w_in[c] = 0: d/d w_in of -log sigma(u.v) = (sigma(0)-1)*u = -0.5*u
        w_in = np.zeros((2, 3))
        w_out = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
        _, d_in, _ = batch_loss_and_grads(
            w_in, w_out, np.array([0]), np.array([1]), np.zeros((1, 0), dtype=np.int64)
        )
        np.testing.assert_allclose(d_in[0], -0.5 * w_out[1])

    def test_negative_equal_to_positive_cancels_at_zero_score(self):
        # one positive plus one negative on the same context node: at dot
        # product 0 the gradients w.r.t. that context row cancel exactly,
        # since (sigma(0)-1) + sigma(0) = 0
        rng = np.random.default_rng(0)
        w_in = rng.standard_normal((3, 4))
        w_out = np.zeros((3, 4))
        _, _, d_out = batch_loss_and_grads(
            w_in, w_out, np.array([0]), np.array([1]), np.array([[1]])
        )
        np.testing.assert_allclose(d_out[1], 0.0, atol=1e-15)

    def test_gradient_check(self):
        assert gradient_check_sgns() < 1e-6


class TestTrainSgns:
    def _barbell_corpus(self, barbell, seed=0):
        prof = density_profile(barbell, "degree")
        cfg = WalkConfig(walk_length=30, seed=seed, walks_per_node=4)
        return generate_walks(barbell, prof, cfg)

    def test_loss_decreases(self, barbell):
        corpus = self._barbell_corpus(barbell)
        emb = train_sgns(corpus, 15, SgnsConfig(dim=16, epochs=5, seed=1))
        assert emb.epoch_losses[-1] < emb.epoch_losses[0]

    def test_entries_finite(self, barbell):
        corpus = self._barbell_corpus(barbell)
        emb = train_sgns(corpus, 15, SgnsConfig(dim=16, epochs=3, seed=1))
        assert np.isfinite(emb.rows).all()

    def test_deterministic(self, barbell):
        corpus = self._barbell_corpus(barbell)
        cfg = SgnsConfig(dim=8, epochs=2, seed=5)
        a = train_sgns(corpus, 15, cfg)
        b = train_sgns(corpus, 15, cfg)
        assert a.rows.tobytes() == b.rows.tobytes()

    def test_intra_clique_similarity_exceeds_inter(self, barbell):
        clique_a, clique_b = list(range(0, 5)), list(range(10, 15))
        for seed in (1, 2, 3):
            corpus = self._barbell_corpus(barbell, seed=seed)
            emb = train_sgns(corpus, 15, SgnsConfig(dim=32, epochs=10, seed=seed))
            x = emb.rows / np.linalg.norm(emb.rows, axis=1, keepdims=True)
            intra = [
                x[a] @ x[b]
                for block in (clique_a, clique_b)
                for i, a in enumerate(block)
                for b in block[i + 1 :]
            ]
            inter = [x[a] @ x[b] for a in clique_a for b in clique_b]
            assert np.mean(intra) > np.mean(inter)

    def test_node_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="node_count"):
            train_sgns(corpus_of([0, 1, 5]), 3, SgnsConfig(dim=4))

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="corpus too short"):
            train_sgns(corpus_of([0]), 3, SgnsConfig(dim=4))

    def test_tsv_roundtrip(self, tmp_path, barbell):
        corpus = self._barbell_corpus(barbell)
        emb = train_sgns(corpus, 15, SgnsConfig(dim=8, epochs=1, seed=0))
        emb.write_tsv(tmp_path / "e.tsv")
        back = EmbeddingMatrix.read_tsv(tmp_path / "e.tsv")
        np.testing.assert_allclose(back.rows, emb.rows)
