"""Pure-numpy implementations of the hot elementwise kernels.

This is the reference backend. `_kernels_numba` provides jit-compiled
twins with identical signatures; `backend` picks one at import time.
Matrix products are not here: BLAS already owns those.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def leaky_relu_fwd(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0.0, x, slope * x)


def leaky_relu_bwd(x: np.ndarray, g: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0.0, g, slope * g)


def dropout_fwd(x: np.ndarray, u: np.ndarray, p: float) -> np.ndarray:
    scale = 1.0 / (1.0 - p)
    return np.where(u >= p, x * scale, 0.0)


def dropout_bwd(u: np.ndarray, g: np.ndarray, p: float) -> np.ndarray:
    scale = 1.0 / (1.0 - p)
    return np.where(u >= p, g * scale, 0.0)


def softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def logsumexp_rows(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1)
    return m + np.log(np.exp(z - m[:, None]).sum(axis=1))


def sigmoid_bce_elems(z: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-element stable BCE loss and sigmoid(z), computed in logit space."""
    loss = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    sig = 1.0 / (1.0 + np.exp(-z))
    return loss, sig


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
    """In-place fused moment update + bias-corrected step + decoupled decay."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    if weight_decay != 0.0:
        param *= 1.0 - lr * weight_decay
    param -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
