"""
ResNet-50 built from bottleneck residual blocks, trained from scratch.

Stem: conv 7x7/2 (pad 3) -> BN -> ReLU -> maxpool 3/2 (no padding).
Stages of 3, 4, 6, 3 bottlenecks with 256/512/1024/2048 output channels; the first
block of every stage uses a projection shortcut, with stride 2 from stage 2 on.
Spatial trace at 64x64: 64 -> 32 -> 15 -> 15 -> 8 -> 4 -> 2 -> 1.
"""
from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveInt, model_validator

from ..engine import ops
from ..engine.tensor import Tensor
from ..errors import ShapeError
from .layers import BatchNorm2d, Conv2d, Dense, GlobalAvgPool, MaxPool2d, Module, ReLU, Sequential

# (stage name, blocks, mid channels, out channels, first stride)
STAGES: Tuple[Tuple[str, int, int, int, int], ...] = (
    ("layer1", 3, 64, 256, 1),
    ("layer2", 4, 128, 512, 2),
    ("layer3", 6, 256, 1024, 2),
    ("layer4", 3, 512, 2048, 2),
)
STEM_CHANNELS = 64


class BottleneckConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    in_channels: PositiveInt
    mid_channels: PositiveInt
    out_channels: PositiveInt
    stride: Literal[1, 2] = 1
    projection: bool = False

    @model_validator(mode="after")
    def _projection_when_shapes_change(self):
        if (self.in_channels != self.out_channels or self.stride != 1) and not self.projection:
            raise ValueError("projection is required when channels or stride change")
        return self


def bottleneck_forward(x: Tensor, cfg: BottleneckConfig, params: "Bottleneck") -> Tensor:
    if x.ndim != 4 or x.shape[1] != cfg.in_channels:
        raise ShapeError(f"Bottleneck expects {cfg.in_channels} input channels, got shape {x.shape}")

    branch = ops.relu(params.bn1(params.conv1(x)))
    branch = ops.relu(params.bn2(params.conv2(branch)))
    branch = params.bn3(params.conv3(branch))

    if cfg.projection:
        shortcut = params.shortcut_bn(params.shortcut_conv(x))
    else:
        shortcut = x
    if shortcut.shape != branch.shape:
        raise ShapeError(f"Identity shortcut {shortcut.shape} cannot be added to branch {branch.shape}")
    return ops.relu(ops.add(branch, shortcut))


class Bottleneck(Module):
    def __init__(self, cfg: BottleneckConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.conv1 = self.add_module("conv1", Conv2d(cfg.in_channels, cfg.mid_channels, 1, rng, bias=False))
        self.bn1 = self.add_module("bn1", BatchNorm2d(cfg.mid_channels))
        self.conv2 = self.add_module("conv2", Conv2d(cfg.mid_channels, cfg.mid_channels, 3, rng, stride=cfg.stride, padding=1, bias=False))
        self.bn2 = self.add_module("bn2", BatchNorm2d(cfg.mid_channels))
        self.conv3 = self.add_module("conv3", Conv2d(cfg.mid_channels, cfg.out_channels, 1, rng, bias=False))
        self.bn3 = self.add_module("bn3", BatchNorm2d(cfg.out_channels))
        if cfg.projection:
            self.shortcut_conv = self.add_module("shortcut_conv", Conv2d(cfg.in_channels, cfg.out_channels, 1, rng, stride=cfg.stride, bias=False))
            self.shortcut_bn = self.add_module("shortcut_bn", BatchNorm2d(cfg.out_channels))

    def forward(self, x):
        return bottleneck_forward(x, self.cfg, self)


def bottleneck_configs() -> List[Tuple[str, BottleneckConfig]]:
    configs = []
    in_channels = STEM_CHANNELS
    for stage, blocks, mid, out, first_stride in STAGES:
        for index in range(blocks):
            stride = first_stride if index == 0 else 1
            configs.append((f"{stage}.{index}", BottleneckConfig(
                in_channels=in_channels,
                mid_channels=mid,
                out_channels=out,
                stride=stride,
                projection=index == 0,
            )))
            in_channels = out
    return configs


def resnet50_layers(seed: int, num_classes: int = 2) -> Sequential:
    rng = np.random.default_rng(seed)
    layers = [
        ("conv1", Conv2d(3, STEM_CHANNELS, 7, rng, stride=2, padding=3, bias=False)),
        ("bn1", BatchNorm2d(STEM_CHANNELS)),
        ("relu", ReLU()),
        ("maxpool", MaxPool2d(3, 2)),
    ]
    layers += [(name, Bottleneck(cfg, rng)) for name, cfg in bottleneck_configs()]
    layers += [
        ("avgpool", GlobalAvgPool()),
        ("fc", Dense(STAGES[-1][3], num_classes, rng)),
    ]
    return Sequential(layers)
