from typing import List, NamedTuple, Tuple

import numpy as np

from ..engine.tensor import Tensor, no_grad
from ..errors import UsageError
from .model import ARCHITECTURES, ModelInstance, ModelSpec
from .resnet import bottleneck_configs, resnet50_layers
from .squeezenet import fire_configs, squeezenet_layers

SQUEEZENET_PARAMS = 736_450
RESNET50_PARAMS = 23_512_130


class LayerSummary(NamedTuple):
    name: str
    output_shape: Tuple[int, ...]
    params: int


def build_squeezenet(seed: int = 0, simple_bypass: bool = False, num_classes: int = 2) -> ModelInstance:
    spec = ModelSpec(
        architecture="squeezenet",
        num_classes=num_classes,
        layers=tuple(cfg for _, cfg in fire_configs()),
        seed=seed,
        simple_bypass=simple_bypass,
    )
    return ModelInstance(spec, squeezenet_layers(seed, num_classes, simple_bypass))


def build_resnet50(seed: int = 0, num_classes: int = 2) -> ModelInstance:
    spec = ModelSpec(
        architecture="resnet50",
        num_classes=num_classes,
        layers=tuple(cfg for _, cfg in bottleneck_configs()),
        seed=seed,
    )
    return ModelInstance(spec, resnet50_layers(seed, num_classes))


def build_model(architecture: str, seed: int = 0, simple_bypass: bool = False) -> ModelInstance:
    if architecture == "squeezenet":
        return build_squeezenet(seed, simple_bypass=simple_bypass)
    if architecture == "resnet50":
        return build_resnet50(seed)
    raise UsageError(f"Unknown architecture '{architecture}'. Valid options: {', '.join(ARCHITECTURES)}")


def param_count(model) -> int:
    """Number of trainable scalars (buffers such as running statistics are not counted)."""
    return int(sum(tensor.size for tensor in model.parameters()))


def summarize(model: ModelInstance) -> List[LayerSummary]:
    """Per top-level layer: output shape (without batch) for a single input of the model's input shape, and parameter count."""
    height, width, channels = model.spec.input_shape
    was_training = model.training
    model.eval()
    rows = []
    try:
        with no_grad():
            x = Tensor(np.zeros((1, channels, height, width)))
            for name, layer in model.network.children():
                x = layer(x)
                rows.append(LayerSummary(name, tuple(x.shape[1:]), param_count(layer)))
    finally:
        model.train(was_training)
    return rows
