"""Pure-numpy training kernels: the fallback backend.

Both backends implement the same two entry points:

    grad_batch(sizes, params, X, y, l2)    -> (mse, flat gradient)
    train_epoch(sizes, params, X, y, order, batch_size, lr, l2) -> epoch SSE

`params` is the flat parameter vector (per layer: row-major weight matrix,
then bias). train_epoch mutates `params` in place and returns the sum of
squared errors of the pre-update minibatch predictions.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def layer_views(sizes: np.ndarray, params: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    ws, bs = [], []
    off = 0
    for i in range(len(sizes) - 1):
        din, dout = int(sizes[i]), int(sizes[i + 1])
        ws.append(params[off : off + din * dout].reshape(dout, din))
        off += din * dout
        bs.append(params[off : off + dout])
        off += dout
    return ws, bs


def forward_batch(sizes: np.ndarray, params: np.ndarray, X: np.ndarray) -> np.ndarray:
    ws, bs = layer_views(sizes, params)
    a = X
    for i, (w, b) in enumerate(zip(ws, bs)):
        a = a @ w.T + b
        if i < len(ws) - 1:
            np.maximum(a, 0.0, out=a)
    return a[:, 0]


def grad_batch(
    sizes: np.ndarray, params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    ws, bs = layer_views(sizes, params)
    acts = [X]
    a = X
    for i, (w, b) in enumerate(zip(ws, bs)):
        a = a @ w.T + b
        if i < len(ws) - 1:
            np.maximum(a, 0.0, out=a)
        acts.append(a)
    err = acts[-1][:, 0] - y
    n = X.shape[0]
    mse = float(err @ err) / n

    grad = np.zeros_like(params)
    gws, gbs = layer_views(sizes, grad)
    delta = (2.0 / n) * err[:, None]
    for i in range(len(ws) - 1, -1, -1):
        gws[i][...] = delta.T @ acts[i]
        gbs[i][...] = delta.sum(axis=0)
        if l2 != 0.0:
            gws[i] += (2.0 * l2) * ws[i]
        if i > 0:
            delta = (delta @ ws[i]) * (acts[i] > 0.0)
    return mse, grad


def train_epoch(
    sizes: np.ndarray,
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    order: np.ndarray,
    batch_size: int,
    lr: float,
    l2: float,
) -> float:
    n = X.shape[0]
    sse = 0.0
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        mse, grad = grad_batch(sizes, params, X[idx], y[idx], l2)
        sse += mse * len(idx)
        params -= lr * grad
    return sse
