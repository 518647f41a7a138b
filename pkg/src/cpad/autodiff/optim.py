"""Adam optimizer and the cosine learning-rate schedule."""

from __future__ import annotations

import math

import numpy as np


class Adam:
    """Bias-corrected Adam over a list of tensors; lr may be overridden per step."""

    def __init__(self, params, lr: float = 2e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= (lr / c1) * m / (np.sqrt(v / c2) + self.eps)


def cosine_lr(t: int, total: int, lr0: float = 2e-4, lr_min: float = 1e-6) -> float:
    """Cosine annealing from lr0 at t=0 down to lr_min at t=total."""
    if total <= 0:
        return lr_min
    tt = min(max(t, 0), total)
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * tt / total))
