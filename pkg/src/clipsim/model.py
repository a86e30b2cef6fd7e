"""Small dense classifier with neuron-level pruning.

Weights for layer ``l`` are stored as one flat float64 vector: the
``(outputs, inputs)`` weight matrix in row-major order followed by the
``outputs`` biases. Row ``j`` of a layer's matrix is the incoming weight row
of neuron ``j``; column ``j`` of the next layer's matrix is its outgoing
column.

Only hidden neurons can be pruned. A pruned neuron is excised from the
computation entirely: training slices the active rows/columns out, trains
the smaller dense network, and writes the change back, leaving exact zeros
at every position the pruned neuron owns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LayerShape",
    "ModelWeights",
    "NeuronMask",
    "DatasetShard",
    "hidden_sizes",
    "mlp_shapes",
    "init_model",
    "forward",
    "train_local",
    "evaluate",
    "keep_positions",
    "active_fraction",
]


@dataclass(frozen=True)
class LayerShape:
    inputs: int
    outputs: int

    def __post_init__(self):
        if self.inputs < 1 or self.outputs < 1:
            raise ValueError(f"layer dimensions must be >= 1, got {self}")

    @property
    def size(self) -> int:
        return self.inputs * self.outputs + self.outputs


def _check_chain(shapes: Sequence[LayerShape]) -> tuple[LayerShape, ...]:
    shapes = tuple(shapes)
    if not shapes:
        raise ValueError("at least one layer is required")
    for a, b in zip(shapes, shapes[1:]):
        if a.outputs != b.inputs:
            raise ValueError(
                f"inconsistent shape chain: {a.outputs} outputs feed {b.inputs} inputs"
            )
    return shapes


def mlp_shapes(n_features: int, hidden: Sequence[int], n_classes: int) -> tuple[LayerShape, ...]:
    dims = [n_features, *hidden, n_classes]
    return tuple(LayerShape(i, o) for i, o in zip(dims, dims[1:]))


def hidden_sizes(shapes: Sequence[LayerShape]) -> list[int]:
    """Neuron counts of the prunable (hidden) layers."""
    return [s.outputs for s in shapes[:-1]]


@dataclass
class ModelWeights:
    shapes: tuple[LayerShape, ...]
    values: list[np.ndarray]

    def __post_init__(self):
        self.shapes = _check_chain(self.shapes)
        if len(self.values) != len(self.shapes):
            raise ValueError("one value vector per layer is required")
        for s, v in zip(self.shapes, self.values):
            if v.ndim != 1 or v.shape[0] != s.size:
                raise ValueError(f"layer {s} expects {s.size} values, got {v.shape}")

    @property
    def total_len(self) -> int:
        return sum(s.size for s in self.shapes)

    def layer(self, idx: int) -> tuple[np.ndarray, np.ndarray]:
        """Views ``(W, b)`` of layer ``idx``; ``W`` has shape (outputs, inputs)."""
        s = self.shapes[idx]
        v = self.values[idx]
        n_w = s.inputs * s.outputs
        return v[:n_w].reshape(s.outputs, s.inputs), v[n_w:]

    def flatten(self) -> np.ndarray:
        return np.concatenate(self.values)

    @classmethod
    def from_flat(cls, shapes: Sequence[LayerShape], flat: np.ndarray) -> "ModelWeights":
        shapes = _check_chain(shapes)
        flat = np.asarray(flat, dtype=np.float64)
        expected = sum(s.size for s in shapes)
        if flat.shape != (expected,):
            raise ValueError(f"expected flat vector of length {expected}, got {flat.shape}")
        bounds = np.cumsum([0] + [s.size for s in shapes])
        return cls(shapes, [flat[a:b].copy() for a, b in zip(bounds, bounds[1:])])

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.shapes, [v.copy() for v in self.values])

    def apply_delta(self, delta: np.ndarray) -> "ModelWeights":
        return ModelWeights.from_flat(self.shapes, self.flatten() + delta)


@dataclass(frozen=True)
class NeuronMask:
    """Per hidden layer, the set of dropped neuron indices."""

    dropped: tuple[frozenset[int], ...]

    @classmethod
    def empty(cls, shapes: Sequence[LayerShape]) -> "NeuronMask":
        return cls(tuple(frozenset() for _ in hidden_sizes(shapes)))

    @classmethod
    def from_global(cls, indices: Iterable[int], shapes: Sequence[LayerShape]) -> "NeuronMask":
        """Build a mask from indices into the concatenation of all hidden layers."""
        sizes = hidden_sizes(shapes)
        offsets = np.cumsum([0] + sizes)
        per_layer: list[set[int]] = [set() for _ in sizes]
        for g in indices:
            g = int(g)
            if not 0 <= g < offsets[-1]:
                raise ValueError(f"neuron index {g} out of range [0, {offsets[-1]})")
            layer = int(np.searchsorted(offsets, g, side="right")) - 1
            per_layer[layer].add(g - int(offsets[layer]))
        return cls(tuple(frozenset(s) for s in per_layer))

    def global_indices(self, shapes: Sequence[LayerShape]) -> list[int]:
        offsets = np.cumsum([0] + hidden_sizes(shapes))
        return sorted(int(offsets[l]) + j for l, d in enumerate(self.dropped) for j in d)

    @property
    def count(self) -> int:
        return sum(len(d) for d in self.dropped)

    def validate(self, shapes: Sequence[LayerShape]) -> None:
        sizes = hidden_sizes(shapes)
        if len(self.dropped) != len(sizes):
            raise ValueError(f"mask covers {len(self.dropped)} hidden layers, model has {len(sizes)}")
        for l, (d, n) in enumerate(zip(self.dropped, sizes)):
            if any(not 0 <= j < n for j in d):
                raise ValueError(f"hidden layer {l}: index out of range [0, {n})")
            if len(d) == n:
                raise ValueError(f"hidden layer {l}: every neuron dropped, no active path")

    def active(self, shapes: Sequence[LayerShape]) -> list[np.ndarray]:
        """Active unit indices for every layer boundary, inputs first."""
        self.validate(shapes)
        out = [np.arange(shapes[0].inputs)]
        for d, n in zip(self.dropped, hidden_sizes(shapes)):
            out.append(np.array([j for j in range(n) if j not in d], dtype=np.intp))
        out.append(np.arange(shapes[-1].outputs))
        return out


@dataclass
class DatasetShard:
    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be [n_samples, n_features] matching labels")

    def __len__(self) -> int:
        return self.labels.shape[0]


def init_model(shapes: Sequence[LayerShape], seed: int) -> ModelWeights:
    """Weights uniform in +-1/sqrt(fan_in), zero biases."""
    shapes = _check_chain(shapes)
    rng = np.random.default_rng(seed)
    values = []
    for s in shapes:
        bound = 1.0 / np.sqrt(s.inputs)
        w = rng.uniform(-bound, bound, size=s.inputs * s.outputs)
        values.append(np.concatenate([w, np.zeros(s.outputs)]))
    return ModelWeights(shapes, values)


def keep_positions(mask: NeuronMask, shapes: Sequence[LayerShape]) -> np.ndarray:
    """Boolean vector over the flat layout: True where a parameter stays active."""
    active = mask.active(shapes)
    parts = []
    for l, s in enumerate(shapes):
        rows = np.zeros(s.outputs, dtype=bool)
        rows[active[l + 1]] = True
        cols = np.zeros(s.inputs, dtype=bool)
        cols[active[l]] = True
        parts.append(np.outer(rows, cols).ravel())
        parts.append(rows)
    return np.concatenate(parts)


def active_fraction(mask: NeuronMask, shapes: Sequence[LayerShape]) -> float:
    keep = keep_positions(mask, shapes)
    return float(keep.sum()) / keep.size


def _relu(x):
    return np.maximum(x, 0.0)


def _dense_forward(params, x):
    acts = [x]
    h = x
    for i, (w, b) in enumerate(params):
        z = h @ w.T + b
        h = z if i == len(params) - 1 else _relu(z)
        acts.append(h)
    return acts


def forward(weights: ModelWeights, x: np.ndarray) -> np.ndarray:
    """Logits of the full (unpruned) network."""
    params = [weights.layer(i) for i in range(len(weights.shapes))]
    return _dense_forward(params, np.asarray(x, dtype=np.float64))[-1]


def _sgd_step(params, x, y, lr):
    acts = _dense_forward(params, x)
    logits = acts[-1]
    logits = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    grad = probs
    grad[np.arange(len(y)), y] -= 1.0
    grad /= len(y)
    for i in range(len(params) - 1, -1, -1):
        w, b = params[i]
        gw = grad.T @ acts[i]
        gb = grad.sum(axis=0)
        if i > 0:
            grad = (grad @ w) * (acts[i] > 0)
        params[i] = (w - lr * gw, b - lr * gb)


def train_local(
    weights: ModelWeights,
    mask: NeuronMask,
    shard: DatasetShard,
    epochs: int,
    lr: float,
    seed: int,
    batch_size: int = 32,
) -> np.ndarray:
    """Train the sub-network selected by ``mask`` and return the weight delta.

    The delta has the full flat layout and is exactly zero at every position
    owned by a dropped neuron.
    """
    if len(shard) == 0:
        raise ValueError("empty shard")
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    shapes = weights.shapes
    active = mask.active(shapes)
    params = []
    for l in range(len(shapes)):
        w, b = weights.layer(l)
        params.append((w[np.ix_(active[l + 1], active[l])].copy(), b[active[l + 1]].copy()))
    start = [(w.copy(), b.copy()) for w, b in params]

    rng = np.random.default_rng(seed)
    n = len(shard)
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            _sgd_step(params, shard.features[idx], shard.labels[idx], lr)

    delta = ModelWeights.from_flat(shapes, np.zeros(weights.total_len))
    for l in range(len(shapes)):
        dw, db = delta.layer(l)
        dw[np.ix_(active[l + 1], active[l])] = params[l][0] - start[l][0]
        db[active[l + 1]] = params[l][1] - start[l][1]
    return delta.flatten()


def evaluate(weights: ModelWeights, shard: DatasetShard) -> float:
    """Top-1 accuracy; ties go to the lowest class index."""
    if len(shard) == 0:
        raise ValueError("empty shard")
    pred = np.argmax(forward(weights, shard.features), axis=1)
    return float(np.mean(pred == shard.labels))
