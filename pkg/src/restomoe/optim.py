"""AdamW with decoupled weight decay and a warmup-cosine schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Parameter


class AdamW:
    """Standard Adam moments with bias correction; weight decay is applied
    directly to the parameters, not through the gradient."""

    def __init__(
        self,
        params: list[Parameter],
        lr: float = 2e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-4,
    ):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        b1, b2 = self.betas
        self.t += 1
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= np.float32(lr) * (update + self.weight_decay * p.data).astype(np.float32)


@dataclass
class WarmupCosine:
    """Linear warmup from lr_init/warmup_steps, then cosine to lr_min."""

    lr_init: float
    warmup_steps: int
    total_steps: int
    lr_min: float = 1e-6

    def __post_init__(self):
        if self.total_steps < self.warmup_steps:
            raise ValueError("total_steps must be at least warmup_steps")

    def lr(self, step: int) -> float:
        if step < self.warmup_steps:
            return self.lr_init * (step + 1) / self.warmup_steps
        span = self.total_steps - 1 - self.warmup_steps  # lr_min lands on the final step
        if span <= 0:
            return self.lr_init
        progress = min(1.0, (step - self.warmup_steps) / span)
        return self.lr_min + 0.5 * (self.lr_init - self.lr_min) * (1.0 + math.cos(math.pi * progress))
