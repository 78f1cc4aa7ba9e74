"""
Baseline fully connected network.

Five hidden blocks (linear -> batch norm -> ReLU) of widths 256, 128, 64, 32, 4
followed by a linear head. Batch norm sits on the first four blocks only,
which gives 49705 learnables for a 20-wide input.
"""

from typing import Optional

import numpy as np

from app.exceptions import DimensionError
from app.models.configs import BaselineConfig, ModelKind
from app.models.records import Dataset
from app.models.training import TrainingLog
from app.nn import BatchNorm, Linear, Tensor, param_count
from app.nn import functional as F

from .base import CauseModel


class BaselineNet(CauseModel):
    """Tabular natural-cause classifier."""

    name = "Baseline Network"
    kind = ModelKind.BASELINE

    def __init__(self, config: BaselineConfig, seed: int = 0, rng: Optional[np.random.Generator] = None):
        super().__init__(config, seed)
        rng = np.random.default_rng(seed) if rng is None else rng
        widths = [config.input_dim, *config.hidden]
        self.layers = [Linear(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]
        normed = len(config.hidden) if config.use_batchnorm_on_last_hidden else len(config.hidden) - 1
        self.norms = [BatchNorm(w) for w in config.hidden[:normed]]
        self.head = Linear(config.hidden[-1], self.output_width, rng)

    def forward(self, features: Tensor, images: Optional[Tensor] = None) -> Tensor:
        if features.ndim != 2 or features.shape[1] != self.config.input_dim:
            raise DimensionError(
                f"{self.name} expects width {self.config.input_dim}, got shape {features.shape}"
            )
        z = features
        for i, layer in enumerate(self.layers):
            z = layer(z)
            if i < len(self.norms):
                z = self.norms[i](z)
            z = F.relu(z)
        return self.head(z)


def baseline_param_count(input_dim: int) -> int:
    """(d*256 + 256) + 512 + 33152 + 8384 + 2144 + 132 + 5"""
    return (input_dim * 256 + 256) + 512 + 33152 + 8384 + 2144 + 132 + 5


def init_baseline(config: BaselineConfig, seed: int) -> BaselineNet:
    return BaselineNet(config, seed=seed)


def forward_baseline(net: BaselineNet, batch: np.ndarray, training: bool = False) -> Tensor:
    """Probabilities (B,) for a batch of feature rows."""
    net.train(training)
    return net.probabilities(net(Tensor(batch)))


def train_baseline(
    net: BaselineNet, train: Dataset, test: Optional[Dataset] = None, seed: Optional[int] = None
) -> TrainingLog:
    return net.fit(train, test, seed=seed)


__all__ = [
    "BaselineNet",
    "baseline_param_count",
    "init_baseline",
    "forward_baseline",
    "train_baseline",
    "param_count",
]
