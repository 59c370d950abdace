# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels: fused forward/backward/update loops.

Same contract as _kernels_np; selected automatically when built. The win is
largest for the few-shot fine-tuning workload (hundreds of epochs over tiny
batches) where per-call numpy overhead dominates.
"""

import numpy as np

cimport numpy as cnp

NAME = "cython"


cdef double _grad_core(const cnp.int64_t[::1] sizes, const double[::1] params,
                       const double[:, ::1] X, const double[::1] y, double l2,
                       double[::1] grad):
    """Accumulate MSE(+l2) gradients into `grad` (caller zeroes it); return MSE."""
    cdef Py_ssize_t nl = sizes.shape[0] - 1
    cdef Py_ssize_t B = X.shape[0]
    cdef Py_ssize_t l, i, j, k, din, dout, woff, boff, off
    cdef double acc, d, err, sse

    offs = []
    off = 0
    for l in range(nl):
        offs.append(off)
        off += sizes[l] * sizes[l + 1] + sizes[l + 1]

    acts = [np.asarray(X)]
    cdef const double[:, ::1] aprev
    cdef double[:, ::1] acur
    for l in range(nl):
        din = sizes[l]
        dout = sizes[l + 1]
        woff = offs[l]
        boff = woff + din * dout
        a_arr = np.empty((B, dout))
        acur = a_arr
        aprev = acts[l]
        for i in range(B):
            for j in range(dout):
                acc = params[boff + j]
                for k in range(din):
                    acc += params[woff + j * din + k] * aprev[i, k]
                if l < nl - 1 and acc < 0.0:
                    acc = 0.0
                acur[i, j] = acc
        acts.append(a_arr)

    cdef const double[:, ::1] out = acts[nl]
    delta_arr = np.empty((B, 1))
    cdef double[:, ::1] delta = delta_arr
    cdef double scale = 2.0 / B
    sse = 0.0
    for i in range(B):
        err = out[i, 0] - y[i]
        sse += err * err
        delta[i, 0] = scale * err

    cdef double[:, ::1] dprev
    for l in range(nl - 1, -1, -1):
        din = sizes[l]
        dout = sizes[l + 1]
        woff = offs[l]
        boff = woff + din * dout
        aprev = acts[l]
        for i in range(B):
            for j in range(dout):
                d = delta[i, j]
                grad[boff + j] += d
                for k in range(din):
                    grad[woff + j * din + k] += d * aprev[i, k]
        if l2 != 0.0:
            for j in range(dout):
                for k in range(din):
                    grad[woff + j * din + k] += 2.0 * l2 * params[woff + j * din + k]
        if l > 0:
            dprev_arr = np.zeros((B, din))
            dprev = dprev_arr
            for i in range(B):
                for j in range(dout):
                    d = delta[i, j]
                    for k in range(din):
                        dprev[i, k] += d * params[woff + j * din + k]
                for k in range(din):
                    if aprev[i, k] <= 0.0:
                        dprev[i, k] = 0.0
            delta = dprev
    return sse / B


def grad_batch(sizes, params, X, y, double l2):
    cdef const cnp.int64_t[::1] sizes_v = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef const double[::1] params_v = params
    cdef const double[:, ::1] x_v = X
    cdef const double[::1] y_v = y
    grad_arr = np.zeros(params.shape[0])
    cdef double[::1] grad_v = grad_arr
    cdef double mse = _grad_core(sizes_v, params_v, x_v, y_v, l2, grad_v)
    return mse, grad_arr


def train_epoch(sizes, params, X, y, order, Py_ssize_t batch_size, double lr, double l2):
    cdef const cnp.int64_t[::1] sizes_v = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef double[::1] params_v = params
    cdef const double[:, ::1] x_v = X
    cdef const double[::1] y_v = y
    cdef const cnp.int64_t[::1] order_v = order

    cdef Py_ssize_t n = x_v.shape[0]
    cdef Py_ssize_t P = params_v.shape[0]
    cdef Py_ssize_t din0 = sizes_v[0]
    cdef Py_ssize_t start = 0, bs, i, p, src
    cdef Py_ssize_t max_bs = batch_size if batch_size < n else n
    cdef double sse = 0.0, mse

    grad_arr = np.zeros(P)
    cdef double[::1] grad = grad_arr
    xb_arr = np.empty((max_bs, din0))
    yb_arr = np.empty(max_bs)
    cdef double[:, ::1] xb = xb_arr
    cdef double[::1] yb = yb_arr

    while start < n:
        bs = batch_size if start + batch_size <= n else n - start
        for i in range(bs):
            src = order_v[start + i]
            for p in range(din0):
                xb[i, p] = x_v[src, p]
            yb[i] = y_v[src]
        for p in range(P):
            grad[p] = 0.0
        mse = _grad_core(sizes_v, params_v, xb[:bs], yb[:bs], l2, grad)
        sse += mse * bs
        for p in range(P):
            params_v[p] -= lr * grad[p]
        start += batch_size
    return sse
