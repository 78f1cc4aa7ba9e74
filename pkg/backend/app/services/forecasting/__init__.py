"""
Forecasting services package.

Provides the natural-cause classifiers: the tabular baseline network and the
hybrid model with WIIN image features.
"""

from typing import Callable, Dict, Type, Union

from app.models.configs import BaselineConfig, HybridConfig, ModelKind, TrainingConfig

from .base import CauseModel
from .baseline import BaselineNet, init_baseline
from .hybrid import HybridModel, init_hybrid

# Registry of available models
AVAILABLE_MODELS: Dict[str, Type[CauseModel]] = {
    ModelKind.BASELINE.value: BaselineNet,
    ModelKind.HYBRID.value: HybridModel,
}

CONFIG_TYPES: Dict[str, Type[TrainingConfig]] = {
    ModelKind.BASELINE.value: BaselineConfig,
    ModelKind.HYBRID.value: HybridConfig,
}

MODEL_FACTORIES: Dict[str, Callable[..., CauseModel]] = {
    ModelKind.BASELINE.value: init_baseline,
    ModelKind.HYBRID.value: init_hybrid,
}


def build_model(kind: Union[str, ModelKind], config: Union[dict, TrainingConfig], seed: int) -> CauseModel:
    """Instantiate a registered model from a config object or a plain config dict."""
    kind = ModelKind(kind).value
    config_type = CONFIG_TYPES[kind]
    if not isinstance(config, config_type):
        config = config_type.model_validate(config if isinstance(config, dict) else config.model_dump())
    return MODEL_FACTORIES[kind](config, seed)


__all__ = [
    "CauseModel",
    "BaselineNet",
    "HybridModel",
    "AVAILABLE_MODELS",
    "CONFIG_TYPES",
    "MODEL_FACTORIES",
    "build_model",
]
