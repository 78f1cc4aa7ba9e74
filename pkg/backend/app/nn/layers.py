"""
Parameterised layers built on the functional primitives.

``Module`` discovers parameters, buffers and sub-modules from instance
attributes in definition order, which fixes the order parameters are
serialised in.
"""

from __future__ import annotations

import math
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from app.exceptions import DimensionError
from app.nn import functional as F
from app.nn.tensor import DTYPE, Tensor, parameter


class Module:
    """Base class for everything holding parameters."""

    training: bool = True

    def __init__(self):
        self._buffers: dict[str, np.ndarray] = {}

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = np.asarray(value, dtype=DTYPE)

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def _children(self) -> Iterator[Tuple[str, object]]:
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            if isinstance(value, (Tensor, Module)):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Tensor, Module)):
                        yield f"{key}.{i}", item

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self._children():
            if isinstance(child, Module):
                yield from child.modules()

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for key, child in self._children():
            name = f"{prefix}{key}"
            if isinstance(child, Tensor):
                if child.requires_grad:
                    yield name, child
            else:
                yield from child.named_parameters(prefix=f"{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for key, value in self._buffers.items():
            yield f"{prefix}{key}", value
        for key, child in self._children():
            if isinstance(child, Module):
                yield from child.named_buffers(prefix=f"{prefix}{key}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        """Parameters followed by buffers, in definition order."""
        state = {name: p.data for name, p in self.named_parameters()}
        state.update({f"{name}": buf for name, buf in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        expected = set(own) | set(buffers)
        if set(state) != expected:
            missing = sorted(expected - set(state))
            unexpected = sorted(set(state) - expected)
            raise DimensionError(f"state mismatch: missing {missing[:5]}, unexpected {unexpected[:5]}")
        for name, value in state.items():
            target = own[name].data if name in own else buffers[name]
            value = np.asarray(value, dtype=DTYPE)
            if value.shape != target.shape:
                raise DimensionError(f"{name}: expected shape {target.shape}, got {value.shape}")
            target[...] = value


def param_count(module: Module) -> int:
    """Number of scalar learnables; running statistics are excluded."""
    return int(sum(p.size for p in module.parameters()))


def _uniform(rng: np.random.Generator, bound: float, shape) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


class Linear(Module):
    """y = x @ W + b, weights drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / math.sqrt(in_features)
        self.weight = parameter(_uniform(rng, bound, (in_features, out_features)))
        self.bias = parameter(_uniform(rng, bound, (out_features,))) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: Union[int, Tuple[int, int]],
        rng: np.random.Generator,
        stride: int = 1,
        padding: Union[int, Tuple[int, int]] = 0,
        bias: bool = True,
    ):
        super().__init__()
        kh, kw = F._pair(kernel_size)
        self.stride = stride
        self.padding = padding
        bound = 1.0 / math.sqrt(in_channels * kh * kw)
        self.weight = parameter(_uniform(rng, bound, (out_channels, in_channels, kh, kw)))
        self.bias = parameter(_uniform(rng, bound, (out_channels,))) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class MaxPool2d(Module):
    def __init__(self, k: int, stride: int, padding: int = 0):
        super().__init__()
        self.k, self.stride, self.padding = k, stride, padding

    def forward(self, x: Tensor) -> Tensor:
        return F.maxpool2d(x, self.k, self.stride, self.padding)


class BatchNorm(Module):
    """Batch norm for (B, F) or (B, C, H, W); running stats start at mean 0, var 1."""

    def __init__(self, num_features: int):
        super().__init__()
        self.weight = parameter(np.ones(num_features))
        self.bias = parameter(np.zeros(num_features))
        self.register_buffer("running_mean", np.zeros(num_features))
        self.register_buffer("running_var", np.ones(num_features))

    def forward(self, x: Tensor) -> Tensor:
        return F.batchnorm(
            x, self.weight, self.bias,
            self.buffer("running_mean"), self.buffer("running_var"),
            training=self.training,
        )


class LayerNorm(Module):
    def __init__(self, dim: int):
        super().__init__()
        self.weight = parameter(np.ones(dim))
        self.bias = parameter(np.zeros(dim))

    def forward(self, x: Tensor) -> Tensor:
        return F.layernorm(x, self.weight, self.bias)


class Dropout(Module):
    """Dropout with its own seeded generator; identity in eval mode."""

    def __init__(self, rate: float, seed: Optional[int] = None):
        super().__init__()
        self.rate = rate
        self._rng = np.random.default_rng(seed)

    def reseed(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)

    def forward(self, x: Tensor) -> Tensor:
        return F.dropout(x, self.rate, self._rng, self.training)
