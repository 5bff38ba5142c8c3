"""Skip-gram with negative sampling over walk corpora.

Plain numpy implementation: center/context pair extraction, unigram^0.75
negative sampling, minibatch SGD with a linearly decaying learning rate.
Single-threaded training is bit-deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SgnsConfig:
    dim: int = 128
    window_radius: int = 2  # 4 context nodes total
    negatives_per_positive: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")


@dataclass
class EmbeddingMatrix:
    """Learned node vectors: `rows` are the input vectors used downstream."""

    rows: np.ndarray
    context_rows: np.ndarray
    epoch_losses: list

    def write_tsv(self, path):
        n, d = self.rows.shape
        with open(path, "w") as fh:
            fh.write(f"{n} {d}\n")
            for i in range(n):
                fh.write(str(i) + " " + " ".join(repr(float(x)) for x in self.rows[i]) + "\n")

    @classmethod
    def read_tsv(cls, path):
        with open(path) as fh:
            n, d = (int(x) for x in fh.readline().split())
            rows = np.zeros((n, d))
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                rows[int(parts[0])] = [float(x) for x in parts[1:]]
        return cls(rows=rows, context_rows=np.zeros_like(rows), epoch_losses=[])


def extract_pairs(corpus, window_radius):
    """All (center, context) pairs within the window, truncated at walk ends."""
    pairs = []
    for walk in corpus.walks:
        n = len(walk)
        for i in range(n):
            lo = max(0, i - window_radius)
            hi = min(n, i + window_radius + 1)
            for j in range(lo, hi):
                if j != i:
                    pairs.append((int(walk[i]), int(walk[j])))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.array(pairs, dtype=np.int64)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def negative_distribution(pairs, node_count):
    """Unigram distribution of corpus tokens raised to the 3/4 power."""
    counts = np.bincount(pairs[:, 0], minlength=node_count).astype(np.float64)
    weights = counts**0.75
    total = weights.sum()
    if total == 0.0:
        return np.full(node_count, 1.0 / node_count)
    return weights / total


def pair_loss(w_in, w_out, center, context, negatives):
    """SGNS loss for one (center, context) pair with its negative samples."""
    v = w_in[center]
    loss = -_log_sigmoid(np.dot(w_out[context], v))
    for nk in negatives:
        loss -= _log_sigmoid(-np.dot(w_out[nk], v))
    return float(loss)


def batch_loss_and_grads(w_in, w_out, centers, contexts, negatives):
    """Loss summed over a batch plus dense gradients (used by the gradient check)."""
    d_in = np.zeros_like(w_in)
    d_out = np.zeros_like(w_out)
    v = w_in[centers]
    u_pos = w_out[contexts]
    u_neg = w_out[negatives]

    s_pos = np.einsum("bd,bd->b", v, u_pos)
    s_neg = np.einsum("bkd,bd->bk", u_neg, v)
    loss = float(-(_log_sigmoid(s_pos).sum() + _log_sigmoid(-s_neg).sum()))

    g_pos = _sigmoid(s_pos) - 1.0  # d loss / d s_pos
    g_neg = _sigmoid(s_neg)  # d loss / d s_neg
    dv = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
    np.add.at(d_in, centers, dv)
    np.add.at(d_out, contexts, g_pos[:, None] * v)
    np.add.at(
        d_out,
        negatives.reshape(-1),
        (g_neg[:, :, None] * v[:, None, :]).reshape(-1, w_out.shape[1]),
    )
    return loss, d_in, d_out


def train_sgns(corpus, node_count, cfg):
    """Train embeddings on the corpus; returns the input vectors plus loss trace."""
    for walk in corpus.walks:
        if len(walk) and int(walk.max()) >= node_count:
            raise ValueError(f"walk references node {int(walk.max())} >= node_count {node_count}")
    pairs = extract_pairs(corpus, cfg.window_radius)
    if len(pairs) == 0:
        raise ValueError("corpus too short: no training pairs")

    rng = np.random.default_rng(cfg.seed)
    d = cfg.dim
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(node_count, d))
    w_out = np.zeros((node_count, d))

    neg_cum = np.cumsum(negative_distribution(pairs, node_count))
    total_batches = max(1, cfg.epochs * ((len(pairs) + cfg.batch_size - 1) // cfg.batch_size))
    batch_no = 0
    epoch_losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for start in range(0, len(pairs), cfg.batch_size):
            batch = pairs[order[start : start + cfg.batch_size]]
            centers, contexts = batch[:, 0], batch[:, 1]
            draws = rng.random((len(batch), cfg.negatives_per_positive))
            negatives = np.searchsorted(neg_cum, draws, side="right")
            np.clip(negatives, 0, node_count - 1, out=negatives)

            lr = cfg.learning_rate + (cfg.min_learning_rate - cfg.learning_rate) * (
                batch_no / total_batches
            )
            lr = max(lr, cfg.min_learning_rate)
            batch_no += 1

            v = w_in[centers]
            u_pos = w_out[contexts]
            u_neg = w_out[negatives]
            s_pos = np.einsum("bd,bd->b", v, u_pos)
            s_neg = np.einsum("bkd,bd->bk", u_neg, v)
            epoch_loss += float(-(_log_sigmoid(s_pos).sum() + _log_sigmoid(-s_neg).sum()))

            g_pos = _sigmoid(s_pos) - 1.0
            g_neg = _sigmoid(s_neg)
            dv = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            np.add.at(w_in, centers, -lr * dv)
            np.add.at(w_out, contexts, -lr * g_pos[:, None] * v)
            np.add.at(
                w_out,
                negatives.reshape(-1),
                (-lr * g_neg[:, :, None] * v[:, None, :]).reshape(-1, d),
            )
        epoch_losses.append(epoch_loss / len(pairs))

    if not np.isfinite(w_in).all():
        raise FloatingPointError("non-finite embedding entries after training")
    return EmbeddingMatrix(rows=w_in, context_rows=w_out, epoch_losses=epoch_losses)


def gradient_check_sgns(n_nodes=8, dim=4, n_pairs=12, negatives=3, seed=7, h=1e-5):
    """Max relative error of analytic gradients vs central finite differences."""
    rng = np.random.default_rng(seed)
    w_in = rng.standard_normal((n_nodes, dim)) * 0.3
    w_out = rng.standard_normal((n_nodes, dim)) * 0.3
    centers = rng.integers(0, n_nodes, size=n_pairs)
    contexts = rng.integers(0, n_nodes, size=n_pairs)
    negs = rng.integers(0, n_nodes, size=(n_pairs, negatives))

    _, d_in, d_out = batch_loss_and_grads(w_in, w_out, centers, contexts, negs)

    def loss_of(a, b):
        loss, _, _ = batch_loss_and_grads(a, b, centers, contexts, negs)
        return loss

    max_rel = 0.0
    for mat, grad, which in ((w_in, d_in, "in"), (w_out, d_out, "out")):
        for idx in np.ndindex(mat.shape):
            orig = mat[idx]
            mat[idx] = orig + h
            up = loss_of(w_in, w_out)
            mat[idx] = orig - h
            down = loss_of(w_in, w_out)
            mat[idx] = orig
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric), abs(grad[idx]), 1e-8)
            max_rel = max(max_rel, abs(numeric - grad[idx]) / denom)
    return max_rel
