from typing import Dict, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveInt, model_validator

from ..engine.tensor import Tensor
from ..errors import IntegrityError
from .layers import Sequential
from .resnet import BottleneckConfig
from .squeezenet import FireConfig

ArchitectureId = Literal["squeezenet", "resnet50"]
ARCHITECTURES: Tuple[str, ...] = ("squeezenet", "resnet50")


class ModelSpec(BaseModel):
    """Declarative description of a network: architecture, input, classes and block configs in order."""

    model_config = ConfigDict(frozen=True)

    architecture: ArchitectureId
    input_shape: Tuple[PositiveInt, PositiveInt, PositiveInt] = (64, 64, 3)
    num_classes: PositiveInt = 2
    layers: Tuple[Union[FireConfig, BottleneckConfig], ...] = ()
    seed: int = 0
    simple_bypass: bool = False

    @model_validator(mode="after")
    def _channels_chain(self):
        for (prev, nxt) in zip(self.layers, self.layers[1:]):
            produced = prev.out_channels
            if nxt.in_channels != produced:
                raise ValueError(f"Layer expects {nxt.in_channels} channels but previous block produces {produced}")
        return self


class ModelInstance:
    """A ModelSpec materialised into parameters. Confine a training instance to one thread."""

    def __init__(self, spec: ModelSpec, network: Sequential):
        self.spec = spec
        self.network = network

    @property
    def architecture(self) -> str:
        return self.spec.architecture

    def forward(self, x: Tensor) -> Tensor:
        return self.network(x)

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def named_parameters(self):
        return self.network.named_parameters()

    def named_buffers(self):
        return self.network.named_buffers()

    def parameters(self) -> List[Tensor]:
        return self.network.parameters()

    def train(self, mode: bool = True) -> "ModelInstance":
        self.network.train(mode)
        return self

    def eval(self) -> "ModelInstance":
        self.network.eval()
        return self

    @property
    def training(self) -> bool:
        return self.network.training

    def zero_grads(self) -> None:
        self.network.zero_grads()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return self.network.state_dict()

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self.network.load_state_dict(state)

    def import_weights(self, state: Dict[str, np.ndarray]) -> int:
        """
        Loads externally trained (e.g. pretrained) weights by name, leaving unmatched tensors untouched.
        Returns how many tensors were imported. Shapes must agree for every matched name.
        """
        current = self.state_dict()
        imported = 0
        for name, array in state.items():
            if name not in current:
                continue
            if np.shape(array) != current[name].shape:
                raise IntegrityError(f"Cannot import '{name}': expected {current[name].shape}, got {np.shape(array)}")
            current[name] = np.asarray(array)
            imported += 1
        self.network.load_state_dict(current)
        return imported
