"""Reverse-mode differentiation over dense 2-D batches.

The primitive set is exactly what the component networks need: affine
maps, leaky ReLU, inverted dropout, softmax, column concatenation and the
three fused losses (softmax cross-entropy, logit-space BCE, cosine
reconstruction). Everything runs in float64.

A :class:`Tape` records each primitive application; ``Tape.backward``
replays the records in reverse, accumulating gradients into the
:class:`Parameter` buffers that were trainable at record time. Any op
that produces a non-finite value raises :class:`NumericError` naming the
op, so a diverging step can never pass silently.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .backend import kernels
from .errors import (
    DegenerateInputError,
    DimensionError,
    LabelError,
    NumericError,
    ParameterError,
    TapeError,
)

_NORM_EPS = 1e-12


class Value:
    """A node in the recorded computation; holds a float64 array."""

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray):
        self.data = data
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def accumulate(self, g: np.ndarray, fresh: bool = False) -> None:
        """Add an incoming gradient; `fresh` donates g instead of copying."""
        if self.grad is None:
            self.grad = g if fresh else g.copy()
        else:
            self.grad += g


class Parameter(Value):
    """A trainable leaf with a persistent gradient buffer."""

    __slots__ = ("name", "trainable")

    def __init__(self, data: np.ndarray, name: str = ""):
        super().__init__(np.ascontiguousarray(data, dtype=np.float64))
        self.grad = np.zeros_like(self.data)
        self.name = name
        self.trainable = True

    def accumulate(self, g: np.ndarray, fresh: bool = False) -> None:
        self.grad += g

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def constant(data: np.ndarray) -> Value:
    """Wrap an array as a non-differentiable graph input."""
    return Value(np.ascontiguousarray(data, dtype=np.float64))


def as_matrix(data: np.ndarray, what: str = "input") -> np.ndarray:
    """Validate a batch: 2-D, finite, float64, C-order."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{what} must be 2-D (batch x features), got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NumericError(f"{what} contains non-finite values")
    return arr


class Tape:
    """Ordered record of primitive applications plus the parameters they touched."""

    def __init__(self):
        self._records: list[tuple[Value, Callable[[np.ndarray], None]]] = []
        self._produced: set[int] = set()
        self._params: dict[int, Parameter] = {}
        self._spent = False

    def record(self, out: Value, pull: Callable[[np.ndarray], None], *params: Parameter) -> None:
        self._records.append((out, pull))
        self._produced.add(id(out))
        for p in params:
            self._params[id(p)] = p

    @property
    def parameters(self) -> list[Parameter]:
        return list(self._params.values())

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, loss: Value) -> None:
        """Accumulate d(loss)/d(param) for every trainable parameter recorded."""
        if self._spent:
            raise TapeError("backward already ran on this tape; clear() it first")
        if id(loss) not in self._produced:
            raise TapeError("loss was not produced by ops recorded on this tape")
        if loss.data.ndim != 0:
            raise DimensionError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        self._spent = True
        loss.grad = np.asarray(1.0)
        for out, pull in reversed(self._records):
            if out.grad is not None:
                pull(out.grad)

    def clear(self) -> None:
        self._records.clear()
        self._produced.clear()
        self._params.clear()
        self._spent = False


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"{op} produced non-finite values")
    return arr


def linear(tape: Tape | None, x: Value, w: Parameter, b: Parameter) -> Value:
    """Affine map: out[i, j] = sum_k x[i, k] w[k, j] + b[j]."""
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise DimensionError(
            f"linear needs 2-D operands, got x{x.data.shape} w{w.data.shape}"
        )
    if x.data.shape[1] != w.data.shape[0]:
        raise DimensionError(
            f"linear shape mismatch: x is {x.data.shape}, w is {w.data.shape}"
        )
    if b.data.shape != (w.data.shape[1],):
        raise DimensionError(
            f"bias shape {b.data.shape} does not match weight columns {w.data.shape[1]}"
        )
    if not np.isfinite(x.data).all():
        raise NumericError("linear received non-finite input")
    out = Value(_check_finite(x.data @ w.data + b.data, "linear"))
    if tape is not None:
        w_live = w.trainable
        b_live = b.trainable

        def pull(g: np.ndarray) -> None:
            x.accumulate(g @ w.data.T, fresh=True)
            if w_live:
                w.grad += x.data.T @ g
            if b_live:
                b.grad += g.sum(axis=0)

        tape.record(out, pull, w, b)
    return out


def leaky_relu(tape: Tape | None, x: Value, slope: float) -> Value:
    """Elementwise max(x, slope*x); the kink at 0 takes the negative branch."""
    if not (0.0 < slope < 1.0):
        raise ParameterError(f"leaky_relu slope must be in (0, 1), got {slope}")
    out = Value(_check_finite(kernels.leaky_relu_fwd(x.data, slope), "leaky_relu"))
    if tape is not None:

        def pull(g: np.ndarray) -> None:
            x.accumulate(kernels.leaky_relu_bwd(x.data, g, slope), fresh=True)

        tape.record(out, pull)
    return out


def dropout(
    tape: Tape | None,
    x: Value,
    p: float,
    training: bool,
    rng: np.random.Generator | None,
) -> Value:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p)."""
    if not (0.0 <= p < 1.0):
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ParameterError("training-mode dropout needs an rng")
    u = rng.random(x.data.shape)
    out = Value(_check_finite(kernels.dropout_fwd(x.data, u, p), "dropout"))
    if tape is not None:

        def pull(g: np.ndarray) -> None:
            x.accumulate(kernels.dropout_bwd(u, g, p), fresh=True)

        tape.record(out, pull)
    return out


def softmax(tape: Tape | None, z: Value) -> Value:
    """Row-wise softmax (max-shifted)."""
    s = _check_finite(kernels.softmax_rows(z.data), "softmax")
    out = Value(s)
    if tape is not None:

        def pull(g: np.ndarray) -> None:
            inner = (g * s).sum(axis=1, keepdims=True)
            z.accumulate(s * (g - inner), fresh=True)

        tape.record(out, pull)
    return out


def concat_cols(tape: Tape | None, a: Value, b: Value) -> Value:
    """Column concatenation [a | b]."""
    if a.data.shape[0] != b.data.shape[0]:
        raise DimensionError(
            f"concat batch mismatch: {a.data.shape} vs {b.data.shape}"
        )
    out = Value(np.hstack((a.data, b.data)))
    if tape is not None:
        split = a.data.shape[1]

        def pull(g: np.ndarray) -> None:
            a.accumulate(g[:, :split])
            b.accumulate(np.ascontiguousarray(g[:, split:]), fresh=True)

        tape.record(out, pull)
    return out


def softmax_cross_entropy(tape: Tape | None, logits: Value, labels: np.ndarray) -> Value:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    z = logits.data
    if z.ndim != 2:
        raise DimensionError(f"logits must be 2-D, got {z.shape}")
    y = np.asarray(labels)
    if y.shape != (z.shape[0],):
        raise DimensionError(f"labels shape {y.shape} does not match batch {z.shape[0]}")
    if y.dtype.kind not in "iu":
        raise LabelError(f"labels must be integers, got dtype {y.dtype}")
    k = z.shape[1]
    if (y < 0).any() or (y >= k).any():
        bad = y[(y < 0) | (y >= k)][0]
        raise LabelError(f"label {bad} outside [0, {k})")
    b = z.shape[0]
    lse = kernels.logsumexp_rows(z)
    loss = Value(np.asarray(_check_finite(
        np.asarray((lse - z[np.arange(b), y]).mean()), "softmax_cross_entropy"
    )))
    if tape is not None:

        def pull(g: np.ndarray) -> None:
            probs = kernels.softmax_rows(z)
            probs[np.arange(b), y] -= 1.0
            logits.accumulate((float(g) / b) * probs, fresh=True)

        tape.record(loss, pull)
    return loss


def sigmoid_bce(tape: Tape | None, logits: Value, target: float) -> Value:
    """Mean binary cross-entropy against a constant 0/1 target, in logit space."""
    if target not in (0.0, 1.0):
        raise ParameterError(f"target must be 0 or 1, got {target}")
    z = logits.data
    elems, sig = kernels.sigmoid_bce_elems(z, float(target))
    loss = Value(np.asarray(_check_finite(np.asarray(elems.mean()), "sigmoid_bce")))
    if tape is not None:
        n = z.size

        def pull(g: np.ndarray) -> None:
            logits.accumulate((float(g) / n) * (sig - target), fresh=True)

        tape.record(loss, pull)
    return loss


def _row_norms(m: np.ndarray) -> np.ndarray:
    return np.sqrt((m * m).sum(axis=1))


def cosine_loss(tape: Tape | None, y_true: Value, y_hat: Value) -> Value:
    """Mean over rows of 1 - cos(y_true, y_hat); range [0, 2]."""
    a, b_ = y_true.data, y_hat.data
    if a.shape != b_.shape:
        raise DimensionError(f"cosine operands disagree: {a.shape} vs {b_.shape}")
    na = _row_norms(a)
    nb = _row_norms(b_)
    if (na == 0.0).any():
        row = int(np.flatnonzero(na == 0.0)[0])
        raise DegenerateInputError(f"cosine target row {row} has zero norm")
    if (nb <= _NORM_EPS).any():
        row = int(np.flatnonzero(nb <= _NORM_EPS)[0])
        raise DegenerateInputError(f"cosine prediction row {row} has near-zero norm")
    dots = (a * b_).sum(axis=1)
    cos = dots / (na * nb)
    loss = Value(np.asarray(_check_finite(np.asarray((1.0 - cos).mean()), "cosine_loss")))
    if tape is not None:
        rows = a.shape[0]

        def pull(g: np.ndarray) -> None:
            scale = float(g) / rows
            # d(1-cos)/d(b) = -(a/(|a||b|) - cos * b/|b|^2)
            y_hat.accumulate(
                -scale * (a / (na * nb)[:, None] - (cos / (nb * nb))[:, None] * b_),
                fresh=True,
            )
            y_true.accumulate(
                -scale * (b_ / (na * nb)[:, None] - (cos / (na * na))[:, None] * a),
                fresh=True,
            )

        tape.record(loss, pull)
    return loss


def weighted_sum(tape: Tape | None, values: Sequence[Value], weights: Sequence[float]) -> Value:
    """Scalar combination sum_i w_i * v_i of scalar losses."""
    if len(values) != len(weights):
        raise DimensionError(f"{len(values)} values vs {len(weights)} weights")
    for v in values:
        if v.data.ndim != 0:
            raise DimensionError(f"weighted_sum needs scalars, got shape {v.data.shape}")
    total = Value(np.asarray(sum(float(w) * float(v.data) for v, w in zip(values, weights))))
    if tape is not None:

        def pull(g: np.ndarray) -> None:
            for v, w in zip(values, weights):
                v.accumulate(np.asarray(float(g) * float(w)))

        tape.record(total, pull)
    return total
