"""AdamW with decoupled weight decay and an optional linear warmup.

Update per parameter:

    m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
    theta <- theta*(1 - lr_t*wd) - lr_t * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)

``lr_t`` ramps linearly over the first ``warmup_fraction`` of the total
step budget and stays constant afterwards. Each parameter keeps its own
step counter so bias correction stays exact when different parameter
groups update at different cadences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .autograd import Parameter
from .backend import kernels
from .errors import NumericError, ParameterError


@dataclass(frozen=True)
class AdamWConfig:
    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    warmup_fraction: float = 0.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ParameterError(f"lr must be positive, got {self.lr}")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ParameterError(f"betas must lie in (0,1), got {self.beta1}, {self.beta2}")
        if not (0.0 <= self.warmup_fraction < 1.0):
            raise ParameterError(f"warmup_fraction must lie in [0,1), got {self.warmup_fraction}")


def lr_at(step: int, total_steps: int, cfg: AdamWConfig) -> float:
    """Learning rate at a 1-based step: linear ramp, then a constant plateau."""
    if step < 1:
        raise ParameterError(f"step must be >= 1, got {step}")
    warm = math.ceil(cfg.warmup_fraction * total_steps)
    if step <= warm:
        return cfg.lr * step / warm
    return cfg.lr


@dataclass
class _Slot:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


@dataclass
class OptimizerState:
    """Per-parameter moment buffers, serializable for checkpoints."""

    slots: dict[str, _Slot] = field(default_factory=dict)


class AdamW:
    """Optimizer over an explicit set of named parameters."""

    def __init__(self, params: Iterable[Parameter], cfg: AdamWConfig):
        self.cfg = cfg
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ParameterError("optimizer parameters must have unique names")
        self.state = OptimizerState(
            {p.name: _Slot(np.zeros_like(p.data), np.zeros_like(p.data)) for p in self.params}
        )

    def step(self, params: Sequence[Parameter] | None = None, lr: float | None = None) -> None:
        """Apply one update to `params` (default: all), consuming their gradients.

        Parameters not listed are left bit-identical: no moment update and
        no weight decay, so alternating phases never leak into each other.
        """
        lr_t = self.cfg.lr if lr is None else lr
        for p in self.params if params is None else params:
            if not np.isfinite(p.grad).all():
                raise NumericError(f"non-finite gradient for parameter {p.name!r}")
            slot = self.state.slots[p.name]
            slot.step += 1
            kernels.adamw_update(
                p.data, p.grad, slot.m, slot.v,
                lr_t, self.cfg.beta1, self.cfg.beta2, self.cfg.eps,
                self.cfg.weight_decay, slot.step,
            )
            p.grad[...] = 0.0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
