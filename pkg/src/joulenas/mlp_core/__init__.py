"""Minimal feed-forward regression engine (ReLU hidden layers, identity output).

Powers the mAP proxy, the generic energy prior, the device residual, and the
joint baseline. Networks are immutable values; training returns a new one.
The inner loops run on a compiled backend when built, numpy otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._backend import ACTIVE, available_backends, backend_name
from . import _kernels_np

CHECKPOINT_FORMAT_VERSION = 1
_FORWARD_CHUNK = 65536


def param_count(layer_sizes: Sequence[int]) -> int:
    return sum(
        layer_sizes[i] * layer_sizes[i + 1] + layer_sizes[i + 1]
        for i in range(len(layer_sizes) - 1)
    )


@dataclass(frozen=True, eq=False)
class Network:
    """Flat parameter vector; per layer a row-major weight matrix then a bias."""

    layer_sizes: tuple[int, ...]
    params: np.ndarray
    activation: str = "relu"

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"layer_sizes must be >= 2 positive counts, got {sizes}")
        if sizes[-1] != 1:
            raise ValueError("this engine only supports scalar regression heads")
        if self.activation != "relu":
            raise ValueError("hidden activation is fixed to relu")
        params = np.ascontiguousarray(self.params, dtype=np.float64)
        if params.shape != (param_count(sizes),):
            raise ValueError(
                f"params length {params.shape} does not match layer sizes {sizes}"
            )
        params = params.copy()
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def weights(self) -> tuple[np.ndarray, ...]:
        ws, _ = _kernels_np.layer_views(np.array(self.layer_sizes), self.params)
        return tuple(ws)

    @property
    def biases(self) -> tuple[np.ndarray, ...]:
        _, bs = _kernels_np.layer_views(np.array(self.layer_sizes), self.params)
        return tuple(bs)

    def _sizes_array(self) -> np.ndarray:
        return np.array(self.layer_sizes, dtype=np.int64)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 150
    batch_size: int = 32
    rng_seed: int = 0
    l2_penalty: float = 0.0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")


def init_network(layer_sizes: Sequence[int], rng_seed: int) -> Network:
    """Glorot-uniform weights, zero biases, from a seeded generator."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(rng_seed)
    params = np.empty(param_count(sizes))
    off = 0
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        n_w = fan_in * fan_out
        params[off : off + n_w] = rng.uniform(-limit, limit, size=n_w)
        off += n_w
        params[off : off + fan_out] = 0.0
        off += fan_out
    return Network(sizes, params)


def zero_output_layer(net: Network) -> Network:
    """Copy of `net` with the final layer's weights and bias set to zero."""
    params = net.params.copy()
    last_in, last_out = net.layer_sizes[-2], net.layer_sizes[-1]
    params[-(last_in * last_out + last_out) :] = 0.0
    return Network(net.layer_sizes, params)


def _coerce_data(net: Network, data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple) and len(data) == 2 and not isinstance(data[0], (list, tuple)):
        X, y = data
    else:
        if len(data) == 0:
            raise ValueError("data must be nonempty")
        X = np.array([np.asarray(x, dtype=float).ravel() for x, _ in data])
        y = np.array([float(t) for _, t in data])
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("data must be a nonempty batch of input vectors")
    if X.shape[1] != net.input_dim:
        raise ValueError(f"input dimension {X.shape[1]} != network input {net.input_dim}")
    if y.shape != (X.shape[0],):
        raise ValueError("targets must align with inputs")
    return X, y


def forward(net: Network, x: np.ndarray) -> float:
    """Deterministic scalar prediction for one input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input must have shape ({net.input_dim},), got {x.shape}")
    return float(forward_batch(net, x[None, :])[0])


def forward_batch(net: Network, X: np.ndarray) -> np.ndarray:
    """Vectorized predictions for an (n, input_dim) matrix, chunked for memory."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ValueError(f"input must be (n, {net.input_dim}), got {X.shape}")
    sizes = net._sizes_array()
    if X.shape[0] <= _FORWARD_CHUNK:
        return _kernels_np.forward_batch(sizes, net.params, X)
    parts = [
        _kernels_np.forward_batch(sizes, net.params, X[s : s + _FORWARD_CHUNK])
        for s in range(0, X.shape[0], _FORWARD_CHUNK)
    ]
    return np.concatenate(parts)


def gradient(net: Network, batch, l2_penalty: float = 0.0) -> np.ndarray:
    """Exact gradient of mean squared error (+ l2 on weights) over the batch.

    Returns a flat vector aligned with Network.params.
    """
    X, y = _coerce_data(net, batch)
    _, grad = ACTIVE.grad_batch(net._sizes_array(), np.asarray(net.params), X, y, float(l2_penalty))
    return grad


def train(net: Network, data, cfg: TrainConfig) -> tuple[Network, list[float]]:
    """Minibatch SGD; deterministic per seed. Returns (trained net, loss trace).

    The trace records each epoch's mean pre-update minibatch MSE. Shuffling
    comes from cfg.rng_seed; batch_size is clamped to the dataset size.
    """
    X, y = _coerce_data(net, data)
    n = X.shape[0]
    bs = min(cfg.batch_size, n)
    rng = np.random.default_rng(cfg.rng_seed)
    params = net.params.copy()
    sizes = net._sizes_array()
    trace: list[float] = []
    for _ in range(cfg.epochs):
        order = np.ascontiguousarray(rng.permutation(n), dtype=np.int64)
        sse = ACTIVE.train_epoch(
            sizes, params, X, y, order, bs, cfg.learning_rate, cfg.l2_penalty
        )
        trace.append(float(sse) / n)
    return Network(net.layer_sizes, params), trace


def rmse(net: Network, data) -> float:
    """Root mean squared prediction error over a nonempty dataset."""
    X, y = _coerce_data(net, data)
    err = forward_batch(net, X) - y
    return float(np.sqrt(np.mean(err * err)))


def to_checkpoint_dict(net: Network) -> dict:
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "mlp",
        "activation": net.activation,
        "layer_sizes": list(net.layer_sizes),
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def from_checkpoint_dict(d: dict) -> Network:
    if d.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format: {d.get('format_version')!r}")
    sizes = tuple(int(s) for s in d["layer_sizes"])
    params = np.empty(param_count(sizes))
    off = 0
    for i in range(len(sizes) - 1):
        n_w = sizes[i] * sizes[i + 1]
        w = np.asarray(d["weights"][i], dtype=float)
        b = np.asarray(d["biases"][i], dtype=float)
        if w.shape != (n_w,) or b.shape != (sizes[i + 1],):
            raise ValueError(f"checkpoint layer {i} does not match layer_sizes")
        params[off : off + n_w] = w
        off += n_w
        params[off : off + sizes[i + 1]] = b
        off += sizes[i + 1]
    return Network(sizes, params, activation=d.get("activation", "relu"))


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_checkpoint_dict(net)) + "\n", encoding="utf-8")


def load_network(path: str | Path) -> Network:
    return from_checkpoint_dict(json.loads(Path(path).read_text(encoding="utf-8")))


__all__ = [
    "Network",
    "TrainConfig",
    "available_backends",
    "backend_name",
    "forward",
    "forward_batch",
    "from_checkpoint_dict",
    "gradient",
    "init_network",
    "load_network",
    "param_count",
    "rmse",
    "save_network",
    "to_checkpoint_dict",
    "train",
    "zero_output_layer",
]
