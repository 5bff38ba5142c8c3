"""Message-passing classifiers: GCN, GAT (single head), GIN, GraphSAGE-mean.

Implemented directly on numpy/scipy.sparse with hand-derived backprop so
gradient checks against finite differences are exact and training is
bit-deterministic for a fixed seed.  Node states pass through a rectifier
after every message-passing layer, get mean-pooled into one graph vector,
and finish in an affine + softmax head trained with cross-entropy.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

LEAKY_SLOPE = 0.2
PROB_FLOOR = 1e-300  # true-class probability underflow counts as divergence

HIDDEN_GRID = (128, 256, 512, 1024)
LR_GRID = (1e-3, 1e-4, 1e-5)


class Variant(str, Enum):
    GCN = "gcn"
    GAT = "gat"
    GIN = "gin"
    SAGE = "sage"


class InputMode(str, Enum):
    NF = "NF"
    RWW = "RWW"
    NF_PLUS_RWW = "NF_plus_RWW"


class TrainingDiverged(Exception):
    """Loss went non-finite or blew up; message carries lr and epoch."""


@dataclass(frozen=True)
class ModelConfig:
    variant: Variant
    input_mode: InputMode = InputMode.RWW
    hidden_dim: int = 128
    num_layers: int = 2
    learning_rate: float = 1e-3
    epochs: int = 200
    patience: int = 20
    seed: int = 0
    class_weighting: bool = False

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")


@dataclass
class TrainedModel:
    variant: Variant
    params: dict  # {"layers": [per-layer dict], "clf": {"W", "b"}}
    input_dim: int
    hidden_dim: int
    n_classes: int
    history: list = field(default_factory=list)  # (epoch, train_loss, val_loss)


def build_inputs(g, emb, mode):
    """Assemble the node feature matrix for one graph per input mode."""
    mode = InputMode(mode)
    if mode is InputMode.NF:
        if g.features is None:
            raise ValueError("input mode NF requires node features on the graph")
        return np.asarray(g.features, dtype=np.float64)
    if mode is InputMode.RWW:
        if emb is None:
            raise ValueError("input mode RWW requires a walk embedding matrix")
        return np.asarray(emb.rows, dtype=np.float64)
    if g.features is None or emb is None:
        raise ValueError("input mode NF_plus_RWW requires both node features and embeddings")
    return np.concatenate(
        [np.asarray(g.features, dtype=np.float64), np.asarray(emb.rows, dtype=np.float64)],
        axis=1,
    )


class GraphOps:
    """Precomputed sparse operators for one graph, shared by all variants."""

    def __init__(self, g):
        n = g.node_count
        self.n = n
        rows, cols = [], []
        for u, nbrs in enumerate(g.adjacency):
            rows.extend([u] * len(nbrs))
            cols.extend(int(v) for v in nbrs)
        data = np.ones(len(rows))
        self.adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))

        deg = np.array([len(a) for a in g.adjacency], dtype=np.float64)
        # GCN propagation: sym-normalized adjacency with self-loops.
        d_tilde = deg + 1.0
        dinv_sqrt = 1.0 / np.sqrt(d_tilde)
        self_loops = sp.identity(n, format="csr")
        a_tilde = self.adj + self_loops
        dmat = sp.diags(dinv_sqrt)
        self.gcn_prop = (dmat @ a_tilde @ dmat).tocsr()
        # SAGE neighbor mean: zero for isolated nodes.
        self.deg_inv = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
        # GAT edge list with self-loops, sorted by destination.
        src = np.concatenate([np.array(rows, dtype=np.int64), np.arange(n)])
        dst = np.concatenate([np.array(cols, dtype=np.int64), np.arange(n)])
        order = np.lexsort((src, dst))
        self.edge_src = src[order]
        self.edge_dst = dst[order]
        counts = np.bincount(self.edge_dst, minlength=n)
        self.edge_indptr = np.concatenate([[0], np.cumsum(counts)])


def _relu(x):
    return np.maximum(x, 0.0)


def _glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_params(variant, input_dim, hidden_dim, num_layers, n_classes, seed):
    rng = np.random.default_rng(seed)
    layers = []
    din = input_dim
    for _ in range(num_layers):
        dout = hidden_dim
        if variant is Variant.GCN:
            layer = {"W": _glorot(rng, (din, dout)), "b": np.zeros(dout)}
        elif variant is Variant.GIN:
            layer = {
                "W1": _glorot(rng, (din, dout)),
                "b1": np.zeros(dout),
                "W2": _glorot(rng, (dout, dout)),
                "b2": np.zeros(dout),
                "eps": np.zeros(1),
            }
        elif variant is Variant.SAGE:
            layer = {"W": _glorot(rng, (2 * din, dout)), "b": np.zeros(dout)}
        else:  # GAT
            layer = {
                "W": _glorot(rng, (din, dout)),
                "b": np.zeros(dout),
                "a_src": rng.uniform(-0.1, 0.1, size=dout),
                "a_dst": rng.uniform(-0.1, 0.1, size=dout),
            }
        layers.append(layer)
        din = dout
    clf = {"W": _glorot(rng, (din, n_classes)), "b": np.zeros(n_classes)}
    return {"layers": layers, "clf": clf}


def _segment_softmax(scores, indptr):
    # every segment is non-empty (self-loops), so reduceat is safe
    starts = indptr[:-1]
    seg_id = np.repeat(np.arange(len(starts)), np.diff(indptr))
    seg_max = np.maximum.reduceat(scores, starts)
    e = np.exp(scores - seg_max[seg_id])
    seg_sum = np.add.reduceat(e, starts)
    return e / seg_sum[seg_id]


def _layer_forward(variant, layer, ops, h):
    """One message-passing layer; returns (activated output, cache)."""
    if variant is Variant.GCN:
        ah = ops.gcn_prop @ h
        z = ah @ layer["W"] + layer["b"]
        out = _relu(z)
        return out, {"h": h, "ah": ah, "z": z}
    if variant is Variant.GIN:
        agg = ops.adj @ h
        s = (1.0 + layer["eps"][0]) * h + agg
        z1 = s @ layer["W1"] + layer["b1"]
        r = _relu(z1)
        z2 = r @ layer["W2"] + layer["b2"]
        out = _relu(z2)
        return out, {"h": h, "s": s, "z1": z1, "r": r, "z2": z2}
    if variant is Variant.SAGE:
        mean_nb = ops.deg_inv[:, None] * (ops.adj @ h)
        c = np.concatenate([h, mean_nb], axis=1)
        z = c @ layer["W"] + layer["b"]
        out = _relu(z)
        return out, {"h": h, "c": c, "z": z}
    # GAT
    hp = h @ layer["W"]
    s_score = hp @ layer["a_src"]
    t_score = hp @ layer["a_dst"]
    pre = s_score[ops.edge_src] + t_score[ops.edge_dst]
    act = np.where(pre > 0, pre, LEAKY_SLOPE * pre)
    alpha = _segment_softmax(act, ops.edge_indptr)
    z = np.zeros_like(hp)
    np.add.at(z, ops.edge_dst, alpha[:, None] * hp[ops.edge_src])
    z = z + layer["b"]
    out = _relu(z)
    return out, {"h": h, "hp": hp, "pre": pre, "alpha": alpha, "z": z}


def _layer_backward(variant, layer, ops, cache, d_out):
    """Backprop one layer; returns (d_input, grads dict matching layer keys)."""
    if variant is Variant.GCN:
        dz = d_out * (cache["z"] > 0)
        grads = {"W": cache["ah"].T @ dz, "b": dz.sum(axis=0)}
        dah = dz @ layer["W"].T
        dh = ops.gcn_prop @ dah  # propagation matrix is symmetric
        return dh, grads
    if variant is Variant.GIN:
        dz2 = d_out * (cache["z2"] > 0)
        grads = {"W2": cache["r"].T @ dz2, "b2": dz2.sum(axis=0)}
        dr = dz2 @ layer["W2"].T
        dz1 = dr * (cache["z1"] > 0)
        grads["W1"] = cache["s"].T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        ds = dz1 @ layer["W1"].T
        grads["eps"] = np.array([(ds * cache["h"]).sum()])
        dh = (1.0 + layer["eps"][0]) * ds + ops.adj @ ds  # adjacency is symmetric
        return dh, grads
    if variant is Variant.SAGE:
        dz = d_out * (cache["z"] > 0)
        grads = {"W": cache["c"].T @ dz, "b": dz.sum(axis=0)}
        dc = dz @ layer["W"].T
        din = cache["h"].shape[1]
        dh = dc[:, :din].copy()
        dh += ops.adj @ (ops.deg_inv[:, None] * dc[:, din:])
        return dh, grads
    # GAT
    dz = d_out * (cache["z"] > 0)
    grads = {"b": dz.sum(axis=0)}
    hp, alpha = cache["hp"], cache["alpha"]
    src, dst, indptr = ops.edge_src, ops.edge_dst, ops.edge_indptr
    d_alpha = np.einsum("ed,ed->e", dz[dst], hp[src])
    d_hp = np.zeros_like(hp)
    np.add.at(d_hp, src, alpha[:, None] * dz[dst])
    # softmax backward per destination segment
    seg_dot = np.bincount(dst, weights=alpha * d_alpha, minlength=ops.n)
    d_act = alpha * (d_alpha - seg_dot[dst])
    d_pre = d_act * np.where(cache["pre"] > 0, 1.0, LEAKY_SLOPE)
    ds = np.bincount(src, weights=d_pre, minlength=ops.n)
    dt = np.bincount(dst, weights=d_pre, minlength=ops.n)
    grads["a_src"] = hp.T @ ds
    grads["a_dst"] = hp.T @ dt
    d_hp += ds[:, None] * layer["a_src"][None, :]
    d_hp += dt[:, None] * layer["a_dst"][None, :]
    grads["W"] = cache["h"].T @ d_hp
    dh = d_hp @ layer["W"].T
    return dh, grads


def _softmax(logits):
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def forward(model, ops, x, return_cache=False):
    """Class probabilities for one graph; sums to 1 within 1e-9."""
    if x.shape[1] != model.input_dim:
        raise ValueError(f"feature width {x.shape[1]} != model input dim {model.input_dim}")
    h = x
    caches = []
    for layer in model.params["layers"]:
        h, cache = _layer_forward(model.variant, layer, ops, h)
        caches.append(cache)
    pooled = h.mean(axis=0)
    logits = pooled @ model.params["clf"]["W"] + model.params["clf"]["b"]
    probs = _softmax(logits)
    if return_cache:
        return probs, {"caches": caches, "h_final": h, "pooled": pooled}
    return probs


def _loss_and_grads(model, ops, x, label, class_weight=1.0):
    probs, cache = forward(model, ops, x, return_cache=True)
    loss = -class_weight * np.log(max(probs[label], 1e-300))
    d_logits = class_weight * probs.copy()
    d_logits[label] -= class_weight

    clf = model.params["clf"]
    grads = {"clf": {"W": np.outer(cache["pooled"], d_logits), "b": d_logits}, "layers": []}
    d_pooled = clf["W"] @ d_logits
    dh = np.tile(d_pooled / ops.n, (ops.n, 1))
    layer_grads = [None] * len(model.params["layers"])
    for i in range(len(model.params["layers"]) - 1, -1, -1):
        dh, g = _layer_backward(model.variant, model.params["layers"][i], ops, cache["caches"][i], dh)
        layer_grads[i] = g
    grads["layers"] = layer_grads
    return loss, grads, probs


def _param_items(params):
    """Deterministic (path, array) listing of every parameter tensor."""
    items = []
    for i, layer in enumerate(params["layers"]):
        for k in sorted(layer):
            items.append(((i, k), layer[k]))
    for k in sorted(params["clf"]):
        items.append((("clf", k), params["clf"][k]))
    return items


def _get(params, path):
    return params["clf"][path[1]] if path[0] == "clf" else params["layers"][path[0]][path[1]]


def _zero_like(params):
    out = {"layers": [{k: np.zeros_like(v) for k, v in layer.items()} for layer in params["layers"]],
           "clf": {k: np.zeros_like(v) for k, v in params["clf"].items()}}
    return out


def _accumulate(total, grads, scale=1.0):
    for i, layer in enumerate(grads["layers"]):
        for k, v in layer.items():
            total["layers"][i][k] += scale * v
    for k, v in grads["clf"].items():
        total["clf"][k] += scale * v


def _copy_params(params):
    return {
        "layers": [{k: v.copy() for k, v in layer.items()} for layer in params["layers"]],
        "clf": {k: v.copy() for k, v in params["clf"].items()},
    }


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = _zero_like(params)
        self.v = _zero_like(params)
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for path, p in _param_items(params):
            g = _get(grads, path)
            m = _get(self.m, path)
            v = _get(self.v, path)
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1**self.t)
            vhat = v / (1 - self.b2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _mean_loss(model, ops_list, xs, labels, idx, weights):
    total = 0.0
    for i in idx:
        probs = forward(model, ops_list[i], xs[i])
        total += -weights[labels[i]] * np.log(max(probs[labels[i]], 1e-300))
    return total / len(idx)


def train(model_cfg, data, inputs):
    """Full-batch Adam training with early stopping on validation loss.

    Returns the model at its best validation epoch.  Raises
    TrainingDiverged when the loss goes non-finite or explodes.
    """
    train_idx = data.indices_of_split("train")
    val_idx = data.indices_of_split("val")
    if not train_idx:
        raise ValueError("empty train split")
    train_labels = {data.labels[i] for i in train_idx}
    if len(train_labels) < 2:
        raise ValueError("training split contains a single class; nothing to learn")

    n_classes = len(data.class_names)
    weights = np.ones(n_classes)
    if model_cfg.class_weighting:
        counts = np.bincount([data.labels[i] for i in train_idx], minlength=n_classes)
        weights = len(train_idx) / np.maximum(counts, 1) / n_classes

    input_dim = inputs[train_idx[0]].shape[1]
    params = init_params(
        model_cfg.variant, input_dim, model_cfg.hidden_dim,
        model_cfg.num_layers, n_classes, model_cfg.seed,
    )
    model = TrainedModel(
        variant=model_cfg.variant, params=params, input_dim=input_dim,
        hidden_dim=model_cfg.hidden_dim, n_classes=n_classes,
    )
    ops_list = [GraphOps(g) for g in data.graphs]
    xs = [np.asarray(x, dtype=np.float64) for x in inputs]
    labels = data.labels

    opt = _Adam(params, model_cfg.learning_rate)
    best_val = np.inf
    best_params = _copy_params(params)
    best_epoch = 0
    stall = 0
    for epoch in range(model_cfg.epochs):
        total_loss = 0.0
        grads = _zero_like(params)
        for i in train_idx:
            loss, g, probs = _loss_and_grads(model, ops_list[i], xs[i], labels[i], weights[labels[i]])
            p_true = probs[labels[i]]
            if not np.isfinite(loss) or not np.isfinite(p_true) or p_true <= PROB_FLOOR:
                raise TrainingDiverged(
                    f"true-class probability underflowed on a training graph at "
                    f"epoch {epoch} (learning rate {model_cfg.learning_rate})"
                )
            total_loss += loss
            _accumulate(grads, g, scale=1.0 / len(train_idx))
        train_loss = total_loss / len(train_idx)
        opt.step(params, grads)

        val_loss = _mean_loss(model, ops_list, xs, labels, val_idx, weights) if val_idx else train_loss
        model.history.append((epoch, float(train_loss), float(val_loss)))
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = _copy_params(params)
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= model_cfg.patience:
                break
    model.params = best_params
    model.best_epoch = best_epoch
    return model


def predict_dataset(model, data, inputs, split=None):
    """(argmax label, probability vector) per graph; ties take the lowest class."""
    idx = data.indices_of_split(split) if split else list(range(len(data)))
    out = []
    for i in idx:
        probs = forward(model, GraphOps(data.graphs[i]), np.asarray(inputs[i], dtype=np.float64))
        out.append((int(np.argmax(probs)), probs))
    return out


def gradient_check_mpnn(variant, seed=0, h=1e-5, hidden_dim=3, num_layers=2):
    """Max relative error of analytic vs central-difference gradients."""
    variant = Variant(variant)
    rng = np.random.default_rng(seed)
    from .graph import Graph

    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)])
    ops = GraphOps(g)
    x = rng.standard_normal((5, 3))
    label = 1
    params = init_params(variant, 3, hidden_dim, num_layers, 2, seed)
    model = TrainedModel(variant=variant, params=params, input_dim=3,
                         hidden_dim=hidden_dim, n_classes=2)

    _, grads, _ = _loss_and_grads(model, ops, x, label)

    def loss_only():
        loss, _, _ = _loss_and_grads(model, ops, x, label)
        return loss

    max_rel = 0.0
    for path, p in _param_items(params):
        analytic = _get(grads, path)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = loss_only()
            p[idx] = orig - h
            down = loss_only()
            p[idx] = orig
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric), abs(analytic[idx]), 1e-6)
            max_rel = max(max_rel, abs(numeric - analytic[idx]) / denom)
    return max_rel


MODEL_MAGIC = b"DWMODEL1"


def save_model(model, path):
    """Versioned binary: magic, JSON header, then row-major float64 tensors."""
    items = _param_items(model.params)
    header = {
        "variant": model.variant.value,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "n_classes": model.n_classes,
        "num_layers": len(model.params["layers"]),
        "tensors": [
            {"path": list(map(str, path)), "shape": list(arr.shape)} for path, arr in items
        ],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in items:
            fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file (bad magic)")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        variant = Variant(header["variant"])
        params = init_params(
            variant, header["input_dim"], header["hidden_dim"],
            header["num_layers"], header["n_classes"], seed=0,
        )
        for spec_ in header["tensors"]:
            path_ = spec_["path"]
            key = ("clf", path_[1]) if path_[0] == "clf" else (int(path_[0]), path_[1])
            shape = tuple(spec_["shape"])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(fh.read(8 * count), dtype=np.float64).reshape(shape)
            if key[0] == "clf":
                params["clf"][key[1]] = arr.copy()
            else:
                params["layers"][key[0]][key[1]] = arr.copy()
    return TrainedModel(
        variant=variant, params=params, input_dim=header["input_dim"],
        hidden_dim=header["hidden_dim"], n_classes=header["n_classes"],
    )
