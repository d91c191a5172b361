"""Adam and the two learning-rate schedules used for training."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update of ``params`` (in place).

    Only keys present in ``params`` are updated; pass the trainable values, never
    batchnorm running buffers.  A key without a gradient is treated as zero
    gradient so its moments still decay.
    """
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            g = np.zeros_like(p)
        elif np.shape(g) != p.shape:
            raise ValueError(f"gradient for {k} has shape {np.shape(g)}, parameter has {p.shape}")
        m = state.m.get(k)
        if m is None:
            m = state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        v = state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass(frozen=True)
class StaircaseSchedule:
    """Linear decay from ``lr0`` to ``lr_end`` in equal steps every ``step_epochs``,
    reaching ``lr_end`` at ``end_epoch`` and constant afterwards."""

    lr0: float = 9e-4
    lr_end: float = 2e-6
    step_epochs: int = 30
    end_epoch: int = 300

    def __call__(self, epoch: int) -> float:
        n_steps = max(1, math.ceil(self.end_epoch / self.step_epochs))
        k = min(epoch // self.step_epochs, n_steps)
        if epoch >= self.end_epoch:
            k = n_steps
        return self.lr0 - (self.lr0 - self.lr_end) * k / n_steps


@dataclass(frozen=True)
class HoldDecaySchedule:
    """Constant ``lr0`` for ``hold_epochs``, then linear to zero at ``total_epochs``."""

    lr0: float = 1e-4
    hold_epochs: int = 100
    total_epochs: int = 200

    def __call__(self, epoch: int) -> float:
        if epoch < self.hold_epochs:
            return self.lr0
        span = self.total_epochs - self.hold_epochs
        if span <= 0:
            return 0.0
        return max(0.0, self.lr0 * (1.0 - (epoch - self.hold_epochs) / span))


def lr_schedule(config, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return config(epoch)
