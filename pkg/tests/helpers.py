"""Shared test oracles: finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from cstune.autograd import Parameter, Tape, Value


def rel_err(a: float, f: float) -> float:
    return abs(a - f) / max(abs(a), abs(f), 1e-12)


def analytic_grads(
    build_loss: Callable[[Tape], Value], params: Sequence[Parameter]
) -> tuple[dict[str, np.ndarray], float]:
    """One tape pass; returns gradients keyed by parameter name."""
    for p in params:
        p.zero_grad()
    tape = Tape()
    loss = build_loss(tape)
    tape.backward(loss)
    return {p.name: p.grad.copy() for p in params}, float(loss.data)


def fd_directional(
    loss_value: Callable[[], float],
    param: Parameter,
    direction: np.ndarray,
    h: float = 1e-5,
) -> float:
    """Central difference of the loss along `direction` in `param`."""
    saved = param.data.copy()
    param.data[...] = saved + h * direction
    up = loss_value()
    param.data[...] = saved - h * direction
    down = loss_value()
    param.data[...] = saved
    return (up - down) / (2 * h)


def check_gradients(
    build_loss: Callable[[Tape | None], Value],
    params: Sequence[Parameter],
    rng: np.random.Generator,
    n_directions: int = 4,
    coords_per_param: int = 6,
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks whole-tensor directional derivatives plus individual
    coordinates whose gradient scale is healthy enough for FD to resolve.
    """

    def loss_value() -> float:
        return float(build_loss(None).data)

    grads, _ = analytic_grads(build_loss, params)
    worst = 0.0
    for p in params:
        g = grads[p.name]
        for _ in range(n_directions):
            d = rng.standard_normal(p.data.shape)
            d /= np.linalg.norm(d)
            analytic = float((g * d).sum())
            numeric = fd_directional(loss_value, p, d, h)
            worst = max(worst, rel_err(analytic, numeric))
        flat = g.ravel()
        if flat.size and np.abs(flat).max() > 1e-4:
            order = np.argsort(-np.abs(flat))[:coords_per_param]
            for idx in order:
                e = np.zeros_like(flat)
                e[idx] = 1.0
                numeric = fd_directional(loss_value, p, e.reshape(p.data.shape), h)
                worst = max(worst, rel_err(float(flat[idx]), numeric))
    return worst
