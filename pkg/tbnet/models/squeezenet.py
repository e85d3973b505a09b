"""
SqueezeNet (v1.0 topology) adapted to 64x64x3 inputs and two classes.

A fire module squeezes channels with a 1x1 convolution, then expands them through
parallel 1x1 and 3x3 convolutions whose outputs are concatenated.

Spatial trace at 64x64: 64 -> 29 (conv1) -> 14 (maxpool1) -> 14 (fire2-4)
-> 6 (maxpool4) -> 6 (fire5-8) -> 2 (maxpool8) -> 2 (fire9, conv10) -> 1 (avgpool).
"""
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveInt, model_validator

from ..engine import ops
from ..engine.tensor import Tensor
from ..errors import ShapeError
from .layers import Conv2d, Dropout, GlobalAvgPool, MaxPool2d, Module, ReLU, Sequential

DROPOUT_P = 0.5

# (name, in_channels, squeeze_1x1, expand_1x1, expand_3x3)
FIRE_LAYOUT: Tuple[Tuple[str, int, int, int, int], ...] = (
    ("fire2", 96, 16, 64, 64),
    ("fire3", 128, 16, 64, 64),
    ("fire4", 128, 32, 128, 128),
    ("fire5", 256, 32, 128, 128),
    ("fire6", 256, 48, 192, 192),
    ("fire7", 384, 48, 192, 192),
    ("fire8", 384, 64, 256, 256),
    ("fire9", 512, 64, 256, 256),
)

# Fires whose input and output channel counts match, so an identity bypass can wrap them.
BYPASS_FIRES = frozenset({"fire3", "fire5", "fire7", "fire9"})


class FireConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    in_channels: PositiveInt
    squeeze_1x1: PositiveInt
    expand_1x1: PositiveInt
    expand_3x3: PositiveInt

    @model_validator(mode="after")
    def _squeeze_reduces(self):
        if self.squeeze_1x1 >= self.expand_1x1 + self.expand_3x3:
            raise ValueError(
                f"squeeze_1x1 ({self.squeeze_1x1}) must be smaller than expand_1x1 + expand_3x3 "
                f"({self.expand_1x1 + self.expand_3x3})"
            )
        return self

    @property
    def out_channels(self) -> int:
        return self.expand_1x1 + self.expand_3x3


def fire_forward(x: Tensor, cfg: FireConfig, params: "Fire") -> Tensor:
    if x.ndim != 4 or x.shape[1] != cfg.in_channels:
        raise ShapeError(f"Fire module expects {cfg.in_channels} input channels, got shape {x.shape}")

    squeezed = ops.relu(params.squeeze(x))
    out = ops.concat_channels(
        ops.relu(params.expand1x1(squeezed)),
        ops.relu(params.expand3x3(squeezed)),
    )
    if params.bypass:
        out = ops.add(out, x)
    return out


class Fire(Module):
    def __init__(self, cfg: FireConfig, rng: np.random.Generator, bypass: bool = False):
        super().__init__()
        if bypass and cfg.in_channels != cfg.out_channels:
            raise ShapeError(f"Bypass needs matching channels, got {cfg.in_channels} -> {cfg.out_channels}")
        self.cfg = cfg
        self.bypass = bypass
        self.squeeze = self.add_module("squeeze", Conv2d(cfg.in_channels, cfg.squeeze_1x1, 1, rng))
        self.expand1x1 = self.add_module("expand1x1", Conv2d(cfg.squeeze_1x1, cfg.expand_1x1, 1, rng))
        self.expand3x3 = self.add_module("expand3x3", Conv2d(cfg.squeeze_1x1, cfg.expand_3x3, 3, rng, padding=1))

    def forward(self, x):
        return fire_forward(x, self.cfg, self)


def fire_configs() -> Tuple[Tuple[str, FireConfig], ...]:
    return tuple(
        (name, FireConfig(in_channels=c, squeeze_1x1=s, expand_1x1=e1, expand_3x3=e3))
        for name, c, s, e1, e3 in FIRE_LAYOUT
    )


def squeezenet_layers(seed: int, num_classes: int = 2, simple_bypass: bool = False) -> Sequential:
    rng = np.random.default_rng(seed)
    fires = {name: cfg for name, cfg in fire_configs()}

    def fire(name):
        return name, Fire(fires[name], rng, bypass=simple_bypass and name in BYPASS_FIRES)

    return Sequential([
        ("conv1", Conv2d(3, 96, 7, rng, stride=2)),
        ("relu1", ReLU()),
        ("maxpool1", MaxPool2d(3, 2)),
        fire("fire2"),
        fire("fire3"),
        fire("fire4"),
        ("maxpool4", MaxPool2d(3, 2)),
        fire("fire5"),
        fire("fire6"),
        fire("fire7"),
        fire("fire8"),
        ("maxpool8", MaxPool2d(3, 2)),
        fire("fire9"),
        ("dropout", Dropout(DROPOUT_P, np.random.default_rng([seed, 1]))),
        # logits: no relu after the classifier conv
        ("conv10", Conv2d(512, num_classes, 1, rng)),
        ("avgpool", GlobalAvgPool()),
    ])
