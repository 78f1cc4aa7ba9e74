"""
Hybrid model: WIIN image features appended to the tabular row, then the
baseline network. One optimizer trains both parts end-to-end.
"""

from typing import Optional

import numpy as np

from app.exceptions import DimensionError
from app.models.configs import HybridConfig, ModelKind
from app.models.records import Dataset
from app.models.training import TrainingLog
from app.nn import Tensor, concat
from app.utils.validators import validate_probability

from .base import CauseModel
from .baseline import BaselineNet
from .wiin import WIIN


def fuse_features(tabular: Tensor, wiin_out: Tensor) -> Tensor:
    """[tabular..., token_feature, image_feature]"""
    if tabular.shape[0] != wiin_out.shape[0]:
        raise DimensionError(f"batch mismatch: {tabular.shape[0]} tabular rows, {wiin_out.shape[0]} image rows")
    if wiin_out.ndim != 2 or wiin_out.shape[1] != 2:
        raise DimensionError(f"expected (B, 2) image features, got {wiin_out.shape}")
    return concat([tabular, wiin_out], axis=1)


class HybridModel(CauseModel):
    """Tabular + imagery natural-cause classifier."""

    name = "Hybrid Model"
    kind = ModelKind.HYBRID
    uses_images = True

    def __init__(self, config: HybridConfig, seed: int = 0):
        super().__init__(config, seed)
        rng = np.random.default_rng(seed)
        self.wiin = WIIN(config.resnet, config.wit, rng, seed=seed)
        self.baseline = BaselineNet(config.baseline_config(), seed=seed, rng=rng)

    def forward(self, features: Tensor, images: Optional[Tensor] = None) -> Tensor:
        if images is None:
            raise DimensionError("hybrid model needs an image for every row")
        if features.ndim != 2 or features.shape[1] != self.config.tabular_dim:
            raise DimensionError(
                f"{self.name} expects tabular width {self.config.tabular_dim}, got shape {features.shape}"
            )
        return self.baseline(fuse_features(features, self.wiin(images)))


def init_hybrid(config: HybridConfig, seed: int) -> HybridModel:
    return HybridModel(config, seed=seed)


def hybrid_forward(model: HybridModel, tabular: np.ndarray, images: np.ndarray, training: bool = False) -> Tensor:
    """Probabilities (B,) for aligned tabular rows and (B, 100, 100) tiles."""
    model.train(training)
    x, img = model._inputs(np.asarray(tabular, dtype=np.float64), np.asarray(images, dtype=np.float64))
    return model.probabilities(model(x, img))


def classify(p: float, threshold: float = 0.5) -> bool:
    """True iff p > threshold."""
    return validate_probability(p) > threshold


def train_hybrid(
    model: HybridModel, train: Dataset, test: Optional[Dataset] = None, seed: Optional[int] = None
) -> TrainingLog:
    if train.images is None:
        raise DimensionError("hybrid training needs images for every row")
    return model.fit(train, test, seed=seed)
