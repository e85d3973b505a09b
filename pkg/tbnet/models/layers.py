"""
Parameter containers for the tensor engine.

A ``Module`` owns named trainable tensors, named buffers (non-trainable arrays such
as batch-norm running statistics) and ordered child modules. Names are dotted paths
(``layer1.0.bn1.weight``) and iteration order is registration order, which is also
the order tensors are written to checkpoints.
"""
import math
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..engine import ops
from ..engine.tensor import Tensor, get_default_dtype
from ..errors import IntegrityError


def he_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int) -> Tensor:
    bound = math.sqrt(6.0 / fan_in)
    values = rng.uniform(-bound, bound, size=tuple(shape))
    return Tensor(values, requires_grad=True, dtype=get_default_dtype())


def zeros_param(shape: Sequence[int]) -> Tensor:
    return Tensor(np.zeros(tuple(shape)), requires_grad=True, dtype=get_default_dtype())


def ones_param(shape: Sequence[int]) -> Tensor:
    return Tensor(np.ones(tuple(shape)), requires_grad=True, dtype=get_default_dtype())


class Module:
    def __init__(self):
        self.training = True
        self._params: Dict[str, Tensor] = {}
        self._buffers: Dict[str, np.ndarray] = {}
        self._children: Dict[str, "Module"] = {}

    # ---- registration ----
    def add_param(self, name: str, tensor: Tensor) -> Tensor:
        self._params[name] = tensor
        return tensor

    def add_buffer(self, name: str, array: np.ndarray) -> np.ndarray:
        self._buffers[name] = array
        return array

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    # ---- traversal ----
    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._params.items():
            yield prefix + name, tensor
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, array in self._buffers.items():
            yield prefix + name, array
        for child_name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{child_name}.")

    def parameters(self) -> List[Tensor]:
        return [tensor for _, tensor in self.named_parameters()]

    def children(self) -> Iterator[Tuple[str, "Module"]]:
        return iter(self._children.items())

    # ---- modes ----
    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    @property
    def mode(self) -> str:
        return "train" if self.training else "eval"

    def zero_grads(self) -> None:
        for tensor in self.parameters():
            tensor.zero_grad()

    # ---- state ----
    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: tensor.data.copy() for name, tensor in self.named_parameters()}
        state.update({name: array.copy() for name, array in self.named_buffers()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copies arrays into the existing buffers in place; names and shapes must match exactly."""
        targets = {name: tensor.data for name, tensor in self.named_parameters()}
        targets.update(dict(self.named_buffers()))

        missing = [name for name in targets if name not in state]
        unexpected = [name for name in state if name not in targets]
        if missing or unexpected:
            raise IntegrityError(f"State mismatch (missing: {missing[:3]}, unexpected: {unexpected[:3]})")
        for name, target in targets.items():
            if state[name].shape != target.shape:
                raise IntegrityError(f"Shape mismatch for '{name}': expected {target.shape}, got {state[name].shape}")

        for name, target in targets.items():
            np.copyto(target, state[name], casting="unsafe")

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, bias: bool = True):
        super().__init__()
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = self.add_param("weight", he_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in))
        self.bias = self.add_param("bias", zeros_param((out_channels,))) if bias else None

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class BatchNorm2d(Module):
    def __init__(self, channels: int):
        super().__init__()
        self.weight = self.add_param("weight", ones_param((channels,)))
        self.bias = self.add_param("bias", zeros_param((channels,)))
        self.stats = ops.RunningStats.create(channels)
        self.add_buffer("running_mean", self.stats.mean)
        self.add_buffer("running_var", self.stats.var)

    def forward(self, x):
        return ops.batch_norm2d(x, self.weight, self.bias, self.stats, mode=self.mode)


class Dense(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = self.add_param("weight", he_uniform(rng, (in_features, out_features), in_features))
        self.bias = self.add_param("bias", zeros_param((out_features,))) if bias else None

    def forward(self, x):
        return ops.dense(x, self.weight, self.bias)


class ReLU(Module):
    def forward(self, x):
        return ops.relu(x)


class MaxPool2d(Module):
    def __init__(self, kernel_size: int, stride: int):
        super().__init__()
        self.kernel_size = kernel_size
        self.stride = stride

    def forward(self, x):
        return ops.maxpool2d(x, self.kernel_size, self.stride)


class GlobalAvgPool(Module):
    def forward(self, x):
        return ops.global_avg_pool(x)


class Flatten(Module):
    def forward(self, x):
        return ops.flatten(x)


class Dropout(Module):
    def __init__(self, p: float, rng: np.random.Generator):
        super().__init__()
        self.p = p
        self.rng = rng

    def forward(self, x):
        return ops.dropout(x, self.p, self.rng, training=self.training)


class Sequential(Module):
    """Named layers applied in order."""

    def __init__(self, layers: Optional[Sequence[Tuple[str, Module]]] = None):
        super().__init__()
        for name, layer in layers or ():
            self.add_module(name, layer)

    def forward(self, x):
        for layer in self._children.values():
            x = layer(x)
        return x
