"""Adam with optional decoupled weight decay, plus the warmup/inverse-sqrt
learning-rate schedule used by the trajectory generator."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, OptimizerError
from .tensor import Parameter


def noam_lr(step: int, warmup: int = 400, base: float = 0.015) -> float:
    """lr(step) = base * min(step^-0.5, step * warmup^-1.5).

    Rises linearly for `warmup` steps, peaks exactly at step == warmup,
    then decays with the inverse square root.
    """
    if step < 1:
        raise DomainError(f"schedule step must be >= 1, got {step}")
    return base * min(step ** -0.5, step * warmup ** -1.5)


class NoamSchedule:
    """Callable schedule; also tracks its own step counter."""

    def __init__(self, warmup: int = 400, base: float = 0.015):
        if warmup < 1:
            raise DomainError("warmup must be >= 1")
        self.warmup = warmup
        self.base = base
        self.step_count = 0

    def __call__(self, step: int) -> float:
        return noam_lr(step, self.warmup, self.base)

    def next_lr(self) -> float:
        self.step_count += 1
        return self(self.step_count)


class Adam:
    """Bias-corrected Adam.  `weight_decay` is decoupled: applied directly
    to the parameter, not through the moment estimates."""

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float | None = None):
        lr = self.lr if lr is None else lr
        for p in self.params:
            if p.grad is None:
                raise OptimizerError("step() called on parameter with empty grad")
            g = p.grad
            if p.m is None:
                p.m = np.zeros_like(p.data)
                p.v = np.zeros_like(p.data)
            p.step += 1
            p.m = self.beta1 * p.m + (1.0 - self.beta1) * g
            p.v = self.beta2 * p.v + (1.0 - self.beta2) * (g * g)
            m_hat = p.m / (1.0 - self.beta1 ** p.step)
            v_hat = p.v / (1.0 - self.beta2 ** p.step)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay:
                p.data -= lr * self.weight_decay * p.data
