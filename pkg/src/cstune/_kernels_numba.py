"""Numba-compiled twins of the `_kernels_numpy` functions.

Single-pass loops avoid the temporaries the numpy backend allocates; this
matters for the 512x8000 activations and the multi-million-parameter
optimizer updates that dominate a training step. fastmath stays off, so
per-backend results are bit-deterministic for a fixed seed.

Thread dispatch has a per-call cost of several milliseconds on small
boxes, so each kernel has a serial and a parallel compilation and the
wrapper picks by element count. Parallel loops write every element
exactly once and never reduce: bit-determinism holds at any thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

NAME = "numba"

_PARALLEL_MIN = 1_500_000


@njit(cache=True)
def _leaky_fwd(x, slope, out):
    for i in range(x.size):
        v = x[i]
        out[i] = v if v > 0.0 else slope * v


def leaky_relu_fwd(x: np.ndarray, slope: float) -> np.ndarray:
    out = np.empty_like(x)
    _leaky_fwd(x.ravel(), slope, out.ravel())
    return out


@njit(cache=True)
def _leaky_bwd(x, g, slope, out):
    for i in range(x.size):
        out[i] = g[i] if x[i] > 0.0 else slope * g[i]


def leaky_relu_bwd(x: np.ndarray, g: np.ndarray, slope: float) -> np.ndarray:
    out = np.empty_like(g)
    _leaky_bwd(x.ravel(), g.ravel(), slope, out.ravel())
    return out


@njit(cache=True)
def _dropout(x, u, p, out):
    scale = 1.0 / (1.0 - p)
    for i in range(x.size):
        out[i] = x[i] * scale if u[i] >= p else 0.0


def dropout_fwd(x: np.ndarray, u: np.ndarray, p: float) -> np.ndarray:
    out = np.empty_like(x)
    _dropout(x.ravel(), u.ravel(), p, out.ravel())
    return out


def dropout_bwd(u: np.ndarray, g: np.ndarray, p: float) -> np.ndarray:
    out = np.empty_like(g)
    _dropout(g.ravel(), u.ravel(), p, out.ravel())
    return out


@njit(cache=True)
def _softmax_rows(z, out):
    n, k = z.shape
    for i in range(n):
        m = z[i, 0]
        for j in range(1, k):
            if z[i, j] > m:
                m = z[i, j]
        s = 0.0
        for j in range(k):
            e = np.exp(z[i, j] - m)
            out[i, j] = e
            s += e
        for j in range(k):
            out[i, j] /= s


def softmax_rows(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    _softmax_rows(z, out)
    return out


@njit(cache=True)
def _logsumexp_rows(z, out):
    n, k = z.shape
    for i in range(n):
        m = z[i, 0]
        for j in range(1, k):
            if z[i, j] > m:
                m = z[i, j]
        s = 0.0
        for j in range(k):
            s += np.exp(z[i, j] - m)
        out[i] = m + np.log(s)


def logsumexp_rows(z: np.ndarray) -> np.ndarray:
    out = np.empty(z.shape[0], dtype=z.dtype)
    _logsumexp_rows(z, out)
    return out


@njit(cache=True)
def _sigmoid_bce(z, t, loss, sig):
    for i in range(z.size):
        v = z[i]
        a = v if v > 0.0 else 0.0
        loss[i] = a - v * t + np.log1p(np.exp(-abs(v)))
        sig[i] = 1.0 / (1.0 + np.exp(-v))


def sigmoid_bce_elems(z: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    loss = np.empty_like(z)
    sig = np.empty_like(z)
    _sigmoid_bce(z.ravel(), t, loss.ravel(), sig.ravel())
    return loss, sig


@njit(cache=True)
def _adamw(param, grad, m, v, lr, beta1, beta2, eps, weight_decay, step):
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    decay = 1.0 - lr * weight_decay
    for i in range(param.size):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        upd = lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)
        param[i] = param[i] * decay - upd


@njit(cache=True, parallel=True)
def _adamw_par(param, grad, m, v, lr, beta1, beta2, eps, weight_decay, step):
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    decay = 1.0 - lr * weight_decay
    for i in prange(param.size):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        upd = lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)
        param[i] = param[i] * decay - upd


def adamw_update(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    weight_decay: float,
    step: int,
) -> None:
    fn = _adamw_par if param.size >= _PARALLEL_MIN else _adamw
    fn(param.ravel(), grad.ravel(), m.ravel(), v.ravel(),
       lr, beta1, beta2, eps, weight_decay, step)
