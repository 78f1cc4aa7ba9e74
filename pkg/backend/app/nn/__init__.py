"""
Tensor engine: reverse-mode autodiff, layer primitives and the Adam optimizer.
"""

from .tensor import Tensor, Tape, backward, concat, parameter
from .layers import (
    BatchNorm,
    Conv2d,
    Dropout,
    LayerNorm,
    Linear,
    MaxPool2d,
    Module,
    param_count,
)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "concat",
    "parameter",
    "Module",
    "Linear",
    "Conv2d",
    "MaxPool2d",
    "BatchNorm",
    "LayerNorm",
    "Dropout",
    "param_count",
    "Adam",
    "AdamState",
    "adam_step",
]
