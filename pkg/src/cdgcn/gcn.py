"""Linkage predictor: graph-convolution layers with a two-way softmax head.

Each aggregation layer computes relu([H || A_hat @ H] @ W) on a pivot
sub-graph; a two-layer head then scores every node and the positive-class
softmax component becomes the probability that the node shares the pivot's
speaker. Forward and backward passes are plain numpy so the analytic
gradients can be checked against finite differences; inference runs in
float32 and training in float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .graphs import SubGraph

WEIGHTS_MAGIC = b"GCNW"
PROB_EPSILON = 1e-7


@dataclass
class GcnWeights:
    """Parameters of the aggregation stack and the prediction head.

    layer_weights[l] has shape (2 * d_in, d_out); consecutive layers must
    chain (rows of layer l+1 equal twice the columns of layer l). The head
    maps the last layer's output through a hidden relu layer to 2 logits.
    """

    layer_weights: list[np.ndarray]
    head_weights: tuple[np.ndarray, np.ndarray]
    head_biases: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        if not self.layer_weights:
            raise ValueError("need at least one aggregation layer")
        for idx, w in enumerate(self.layer_weights):
            if w.ndim != 2 or w.shape[0] % 2:
                raise ValueError(f"layer {idx}: weight shape {w.shape} is not (2*d_in, d_out)")
            if idx and w.shape[0] != 2 * self.layer_weights[idx - 1].shape[1]:
                raise ValueError(
                    f"layer {idx}: expected {2 * self.layer_weights[idx - 1].shape[1]} rows, "
                    f"got {w.shape[0]}"
                )
        w1, w2 = self.head_weights
        b1, b2 = self.head_biases
        if w1.shape[0] != self.layer_weights[-1].shape[1]:
            raise ValueError(
                f"head: expected {self.layer_weights[-1].shape[1]} input rows, got {w1.shape[0]}"
            )
        if w2.shape != (w1.shape[1], 2):
            raise ValueError(f"head: output layer shape {w2.shape} is not ({w1.shape[1]}, 2)")
        if b1.shape != (w1.shape[1],) or b2.shape != (2,):
            raise ValueError("head bias shapes do not match the head weights")

    @property
    def feature_dim(self) -> int:
        return self.layer_weights[0].shape[0] // 2

    @property
    def num_layers(self) -> int:
        return len(self.layer_weights)

    @property
    def dtype(self):
        return self.layer_weights[0].dtype

    def astype(self, dtype) -> "GcnWeights":
        return GcnWeights(
            [w.astype(dtype) for w in self.layer_weights],
            tuple(w.astype(dtype) for w in self.head_weights),
            tuple(b.astype(dtype) for b in self.head_biases),
        )

    def tensors(self):
        """All parameter arrays in a fixed order (layers, W1, b1, W2, b2)."""
        return [*self.layer_weights, self.head_weights[0], self.head_biases[0],
                self.head_weights[1], self.head_biases[1]]

    @classmethod
    def from_tensors(cls, tensors) -> "GcnWeights":
        return cls(list(tensors[:-4]),
                   (tensors[-4], tensors[-2]),
                   (tensors[-3], tensors[-1]))

    @classmethod
    def glorot(cls, feature_dim: int, num_layers: int = 4, hidden_dim: int | None = None,
               seed: int = 0, dtype=np.float32) -> "GcnWeights":
        """Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
        rng = np.random.default_rng(seed)

        def draw(rows, cols):
            bound = np.sqrt(6.0 / (rows + cols))
            return rng.uniform(-bound, bound, size=(rows, cols)).astype(dtype)

        layers = [draw(2 * feature_dim, feature_dim) for _ in range(num_layers)]
        hidden = feature_dim if hidden_dim is None else hidden_dim
        w1 = draw(feature_dim, hidden)
        w2 = draw(hidden, 2)
        return cls(layers, (w1, w2),
                   (np.zeros(hidden, dtype=dtype), np.zeros(2, dtype=dtype)))


def normalize_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """Symmetrically normalized adjacency with self-connections added.

    Adds the identity, then rescales by the inverse square root of the
    resulting row sums on both sides. The self-connection keeps every
    degree positive, so no entry can divide by zero.
    """
    a = np.asarray(adjacency)
    a_tilde = a + np.eye(a.shape[0], dtype=a.dtype)
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]


def gcn_layer_forward(h: np.ndarray, a_hat: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One aggregation layer: relu(concat(H, A_hat @ H) @ W)."""
    h = np.asarray(h)
    if w.shape[0] != 2 * h.shape[1]:
        raise ValueError(f"weight rows {w.shape[0]} do not match 2 * feature dim {2 * h.shape[1]}")
    if a_hat.shape != (h.shape[0], h.shape[0]):
        raise ValueError(f"adjacency shape {a_hat.shape} does not match {h.shape[0]} nodes")
    m = np.concatenate([h, a_hat @ h], axis=1)
    return np.maximum(m @ w, 0)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def gcn_forward(sub: SubGraph, weights: GcnWeights) -> np.ndarray:
    """Per-neighbor probability that the neighbor shares the pivot's speaker.

    Runs the aggregation stack in the weights' precision, applies the
    two-layer head to every node, and returns the positive-class softmax
    component for the non-pivot members, in member order.
    """
    if sub.features.shape[1] != weights.feature_dim:
        raise ValueError(
            f"sub-graph feature dim {sub.features.shape[1]} does not match "
            f"weights feature dim {weights.feature_dim}"
        )
    dtype = weights.dtype
    a_hat = normalize_adjacency(sub.adjacency.astype(dtype))
    h = sub.features.astype(dtype)
    for w in weights.layer_weights:
        h = gcn_layer_forward(h, a_hat, w)
    w1, w2 = weights.head_weights
    b1, b2 = weights.head_biases
    z = np.maximum(h @ w1 + b1, 0)
    probs = _softmax(z @ w2 + b2)[:, 1]
    return probs[1:]


def bce_loss(pred: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross entropy with predictions clipped to [eps, 1-eps]."""
    pred = np.asarray(pred, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if pred.shape != labels.shape:
        raise ValueError(f"{pred.shape[0] if pred.ndim else 0} predictions vs {labels.shape} labels")
    if pred.size == 0:
        return 0.0
    p = np.clip(pred, PROB_EPSILON, 1.0 - PROB_EPSILON)
    return float(np.mean(-(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))))


class _PreparedBatch:
    """Sub-graph with its normalized adjacency cached for repeated epochs."""

    __slots__ = ("features", "a_hat", "labels")

    def __init__(self, sub: SubGraph, labels, dtype):
        labels = np.asarray(labels, dtype=np.float64)
        if labels.shape != (sub.neighbor_count,):
            raise ValueError(
                f"pivot {sub.pivot}: {labels.size} labels for {sub.neighbor_count} neighbors"
            )
        if not np.isin(labels, (0.0, 1.0)).all():
            raise ValueError(f"pivot {sub.pivot}: labels must be 0 or 1")
        self.features = sub.features.astype(dtype)
        self.a_hat = normalize_adjacency(sub.adjacency.astype(dtype))
        self.labels = labels.astype(dtype)


def _batch_loss_and_grads(batch: _PreparedBatch, weights: GcnWeights):
    """Loss and parameter gradients for one sub-graph, by backpropagation."""
    lw = weights.layer_weights
    w1, w2 = weights.head_weights
    b1, b2 = weights.head_biases

    h = batch.features
    hs = [h]
    concats = []
    pre_acts = []
    for w in lw:
        m = np.concatenate([h, batch.a_hat @ h], axis=1)
        pre = m @ w
        h = np.maximum(pre, 0)
        concats.append(m)
        pre_acts.append(pre)
        hs.append(h)

    s = h @ w1 + b1
    z = np.maximum(s, 0)
    logits = z @ w2 + b2
    sm = _softmax(logits)
    probs = sm[1:, 1]
    k = probs.size
    loss = bce_loss(probs, batch.labels)

    # Clipped predictions contribute a flat loss, hence zero gradient.
    dlogits = np.zeros_like(logits)
    if k:
        active = (probs > PROB_EPSILON) & (probs < 1.0 - PROB_EPSILON)
        target = np.zeros_like(sm[1:])
        target[np.arange(k), batch.labels.astype(np.int64)] = 1.0
        dlogits[1:] = (sm[1:] - target) * (active[:, None] / k)

    dz = dlogits @ w2.T
    ds = dz * (s > 0)
    grad_w2 = z.T @ dlogits
    grad_b2 = dlogits.sum(axis=0)
    grad_w1 = hs[-1].T @ ds
    grad_b1 = ds.sum(axis=0)
    dh = ds @ w1.T

    grad_layers = [None] * len(lw)
    for l in range(len(lw) - 1, -1, -1):
        dpre = dh * (pre_acts[l] > 0)
        grad_layers[l] = concats[l].T @ dpre
        dm = dpre @ lw[l].T
        d_in = hs[l].shape[1]
        dh = dm[:, :d_in] + batch.a_hat.T @ dm[:, d_in:]

    grads = GcnWeights(grad_layers, (grad_w1, grad_w2), (grad_b1, grad_b2))
    return loss, grads


def loss_and_gradients(batches, weights: GcnWeights):
    """Mean BCE over (SubGraph, labels) batches and its parameter gradients."""
    prepared = [_PreparedBatch(sub, labels, weights.dtype) for sub, labels in batches]
    return _prepared_loss_and_gradients(prepared, weights)


def _prepared_loss_and_gradients(prepared, weights: GcnWeights):
    counted = [b for b in prepared if b.labels.size]
    if not counted:
        zero = GcnWeights.from_tensors([np.zeros_like(t) for t in weights.tensors()])
        return 0.0, zero
    total_loss = 0.0
    total = [np.zeros_like(t) for t in weights.tensors()]
    for batch in counted:
        loss, grads = _batch_loss_and_grads(batch, weights)
        total_loss += loss
        for acc, g in zip(total, grads.tensors()):
            acc += g
    scale = 1.0 / len(counted)
    return total_loss * scale, GcnWeights.from_tensors([t * scale for t in total])


def train(batches, init: GcnWeights | None = None, lr: float = 1e-2, epochs: int = 100,
          seed: int = 0, on_epoch=None) -> GcnWeights:
    """Full-batch gradient descent on the mean BCE across sub-graphs.

    When init is omitted, a seeded Glorot initialization is drawn from the
    first batch's feature dimension. Optimization runs in float64 and the
    result is cast back to init's precision; epochs = 0 returns init
    unchanged. on_epoch, when given, receives (epoch, loss) before each
    update. A non-finite loss aborts with the offending epoch index.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if not batches:
        raise ValueError("no training batches")
    if init is None:
        init = GcnWeights.glorot(batches[0][0].features.shape[1], seed=seed)
    if epochs == 0:
        return init
    weights = init.astype(np.float64)
    prepared = [_PreparedBatch(sub, labels, np.float64) for sub, labels in batches]
    for epoch in range(epochs):
        loss, grads = _prepared_loss_and_gradients(prepared, weights)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite training loss at epoch {epoch}")
        if on_epoch is not None:
            on_epoch(epoch, loss)
        stepped = [t - lr * g for t, g in zip(weights.tensors(), grads.tensors())]
        weights = GcnWeights.from_tensors(stepped)
    return weights.astype(init.dtype)


def save_weights(weights: GcnWeights) -> bytes:
    """Serialize weights: magic, layer count, then (rows, cols, float32 data)
    per aggregation layer and per head layer with its bias appended."""
    w = weights.astype(np.float32)
    out = [struct.pack("<4sI", WEIGHTS_MAGIC, w.num_layers)]
    for mat in w.layer_weights:
        out.append(struct.pack("<II", *mat.shape))
        out.append(mat.astype("<f4").tobytes())
    for mat, bias in zip(w.head_weights, w.head_biases):
        out.append(struct.pack("<II", *mat.shape))
        out.append(mat.astype("<f4").tobytes())
        out.append(bias.astype("<f4").tobytes())
    return b"".join(out)


def load_weights(data: bytes) -> GcnWeights:
    """Parse bytes produced by :func:`save_weights`; exact float32 round-trip."""
    if len(data) < 8:
        raise ValueError("truncated weights data")
    magic, num_layers = struct.unpack_from("<4sI", data, 0)
    if magic != WEIGHTS_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {WEIGHTS_MAGIC!r}")
    offset = 8

    def take(count):
        nonlocal offset
        if offset + 4 * count > len(data):
            raise ValueError("truncated weights data")
        out = np.frombuffer(data, dtype="<f4", count=count, offset=offset).copy()
        offset += 4 * count
        return out

    def matrix():
        nonlocal offset
        if offset + 8 > len(data):
            raise ValueError("truncated weights data")
        rows, cols = struct.unpack_from("<II", data, offset)
        offset += 8
        return take(rows * cols).reshape(rows, cols), cols

    layers = [matrix()[0] for _ in range(num_layers)]
    w1, hidden = matrix()
    b1 = take(hidden)
    w2, out_dim = matrix()
    b2 = take(out_dim)
    if offset != len(data):
        raise ValueError(f"{len(data) - offset} trailing bytes in weights data")
    return GcnWeights(layers, (w1, w2), (b1, b2))
