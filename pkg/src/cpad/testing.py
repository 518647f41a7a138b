"""Verification helpers shared by the CLI gradcheck command and the test suite."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, gradcheck
from .autodiff.gradcheck import GradCheckResult
from .net import CPADNet, ModelConfig


def tiny_network(conditioned: bool = True, seed: int = 0, dtype=np.float64) -> CPADNet:
    return CPADNet(ModelConfig.tiny(conditioned=conditioned), seed=seed, dtype=dtype)


def network_gradcheck(
    eps: float = 1e-3, sample: int | None = 24, seed: int = 0, size: int = 8
) -> list[GradCheckResult]:
    """End-to-end finite-difference check of the tiny conditioned network.

    Covers the input image, the condition vector, and every trainable tensor;
    `sample` caps the coordinates checked per tensor.  The network is randomly
    perturbed away from its zero-init so every path carries signal.
    """
    model = tiny_network(conditioned=True, seed=seed)
    rng = np.random.Generator(np.random.Philox(key=seed + 11))
    for _, t in model.named_parameters():
        t.data = t.data + rng.uniform(-0.05, 0.05, size=t.shape)

    x = Tensor(rng.uniform(0.1, 0.9, size=(1, 3, size, size)), requires_grad=True, dtype=np.float64)
    v = Tensor(rng.uniform(0.0, 1.0, size=(1, model.config.cond_dim)), requires_grad=True, dtype=np.float64)

    wrt = [("input", x), ("cond", v)] + model.named_parameters()
    results = gradcheck(lambda: model.forward(x, v, training=False), wrt, eps=eps, seed=seed, sample=sample)
    return [
        GradCheckResult(f"network/{r.name}", r.max_abs_err, r.max_rel_err, r.n_checked)
        for r in results
    ]
