from .layers import BatchNorm2d, Conv2d, Dense, Dropout, Flatten, GlobalAvgPool, MaxPool2d, Module, ReLU, Sequential
from .model import ARCHITECTURES, ModelInstance, ModelSpec
from .registry import (
    RESNET50_PARAMS,
    SQUEEZENET_PARAMS,
    LayerSummary,
    build_model,
    build_resnet50,
    build_squeezenet,
    param_count,
    summarize,
)
from .resnet import Bottleneck, BottleneckConfig, bottleneck_forward
from .squeezenet import Fire, FireConfig, fire_forward
