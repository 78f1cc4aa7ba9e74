"""
Models package for the wildfire-cause forecasting engine.
"""

from .records import (
    FireRecord,
    WeatherSeries,
    FeatureVector,
    GrayImage,
    ResampleMethod,
    SmoteMode,
    SplitPlan,
    ParsedRecords,
    Dataset,
)

from .configs import (
    LossFunction,
    ModelKind,
    TrainingConfig,
    BaselineConfig,
    ResNetConfig,
    WITConfig,
    HybridConfig,
    RunConfig,
    build_run_config,
)

from .metrics import (
    ConfusionMatrix,
    Rates,
    RocCurve,
    BayesInputs,
    BayesComposition,
    EvaluationReport,
    ProbabilityGrid,
)

from .training import EpochStats, BatchLoss, TrainingLog
from .checkpoint import TensorEntry, StandardizerState, CheckpointManifest, ModelCheckpoint

__all__ = [
    # Record models
    "FireRecord",
    "WeatherSeries",
    "FeatureVector",
    "GrayImage",
    "ResampleMethod",
    "SmoteMode",
    "SplitPlan",
    "ParsedRecords",
    "Dataset",
    # Configuration models
    "LossFunction",
    "ModelKind",
    "TrainingConfig",
    "BaselineConfig",
    "ResNetConfig",
    "WITConfig",
    "HybridConfig",
    "RunConfig",
    "build_run_config",
    # Metric models
    "ConfusionMatrix",
    "Rates",
    "RocCurve",
    "BayesInputs",
    "BayesComposition",
    "EvaluationReport",
    "ProbabilityGrid",
    # Training models
    "EpochStats",
    "BatchLoss",
    "TrainingLog",
    # Checkpoint models
    "TensorEntry",
    "StandardizerState",
    "CheckpointManifest",
    "ModelCheckpoint",
]
