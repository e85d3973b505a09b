"""
SGD with momentum and Adam.

The functional steps update parameter arrays in place; the optimizer classes own
the per-parameter state and read gradients from the tensors they were given.
"""
import math
from typing import List, Sequence

import numpy as np

from ..engine.tensor import Tensor
from ..errors import ContractError


def _check_shapes(params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
    if len(params) != len(grads):
        raise ContractError(f"Got {len(params)} parameters but {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            raise ContractError(f"Gradient {i} is not populated")
        if p.shape != g.shape:
            raise ContractError(f"Parameter {i} has shape {p.shape} but its gradient has shape {g.shape}")


def sgd_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], velocities: Sequence[np.ndarray],
             lr: float, momentum: float = 0.0) -> None:
    """v <- momentum * v + g; w <- w - lr * v."""
    _check_shapes(params, grads)
    for w, g, v in zip(params, grads, velocities):
        v *= momentum
        v += g
        w -= lr * v


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], first: Sequence[np.ndarray],
              second: Sequence[np.ndarray], lr: float, t: int, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Bias-corrected Adam update for step t (t >= 1)."""
    if t < 1:
        raise ContractError(f"Adam step counter must be >= 1, got {t}")
    _check_shapes(params, grads)
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for w, g, m, v in zip(params, grads, first, second):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        w -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


class Optimizer:
    def __init__(self, params: List[Tensor], lr: float):
        if not lr > 0 or not math.isfinite(lr):
            raise ContractError(f"Learning rate must be a positive number, got {lr}")
        self.params = list(params)
        self.lr = lr

    def _arrays(self):
        return [p.data for p in self.params], [p.grad for p in self.params]

    def zero_grads(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    def __init__(self, params: List[Tensor], lr: float, momentum: float = 0.9):
        super().__init__(params, lr)
        self.momentum = momentum
        self.velocities = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        weights, grads = self._arrays()
        sgd_step(weights, grads, self.velocities, self.lr, self.momentum)


class Adam(Optimizer):
    def __init__(self, params: List[Tensor], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(params, lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.first = [np.zeros_like(p.data) for p in self.params]
        self.second = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        weights, grads = self._arrays()
        adam_step(weights, grads, self.first, self.second, self.lr, self.t, self.beta1, self.beta2, self.eps)
