"""
Pydantic models for model and run configuration.
"""

from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.config import cause_code_for
from app.exceptions import UsageError
from app.models.records import FeatureSet, ResampleMethod, SmoteMode

BASELINE_HIDDEN: Tuple[int, ...] = (256, 128, 64, 32, 4)


class LossFunction(str, Enum):
    MSE = "mse"
    CROSS_ENTROPY = "cross_entropy"


class ModelKind(str, Enum):
    BASELINE = "baseline"
    HYBRID = "hybrid model"


class TrainingConfig(BaseModel):
    """Optimisation settings shared by every model."""

    loss: LossFunction = LossFunction.MSE
    learning_rate: float = Field(default=0.01, gt=0.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    epochs: int = Field(default=100, ge=1)
    batch_size: Optional[int] = Field(default=None, ge=2, description="None trains full-batch")
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    display_step: int = Field(default=10, ge=1)


class BaselineConfig(TrainingConfig):
    """Five hidden fully connected blocks followed by a width-4 -> 1 head."""

    input_dim: int = Field(default=20, ge=1)
    hidden: Tuple[int, ...] = BASELINE_HIDDEN
    use_batchnorm_on_last_hidden: bool = False

    @field_validator("hidden")
    @classmethod
    def check_hidden(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if not v or any(w <= 0 for w in v):
            raise ValueError("hidden widths must be positive")
        return tuple(v)


class ResNetConfig(BaseModel):
    """ResNet-lite stage: stem, identity block, downsampling block, final pool."""

    image_size: int = 100
    stem_channels: int = Field(default=16, ge=1)
    block1_channels: int = Field(default=16, ge=1)
    block1_units: int = Field(default=3, ge=1)
    block2_channels: int = Field(default=32, ge=1)


class WITConfig(BaseModel):
    """Transformer stage over patches of the 10x10 map."""

    patch_size: int = Field(default=2, ge=1)
    hidden_dim: int = Field(default=64, ge=1)
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=8, ge=1)
    mlp_neurons: int = Field(default=8, ge=1)
    dropout: float = Field(default=0.2, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def check_heads(self) -> "WITConfig":
        if self.hidden_dim % self.heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by {self.heads} heads")
        return self

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.heads


class HybridConfig(TrainingConfig):
    """WIIN feature extractor fused into a baseline network."""

    tabular_dim: int = Field(default=20, ge=1)
    batch_size: Optional[int] = Field(default=32, ge=2)
    resnet: ResNetConfig = Field(default_factory=ResNetConfig)
    wit: WITConfig = Field(default_factory=WITConfig)
    use_batchnorm_on_last_hidden: bool = False

    @property
    def fused_width(self) -> int:
        return self.tabular_dim + 2

    def baseline_config(self) -> BaselineConfig:
        return BaselineConfig(
            input_dim=self.fused_width,
            use_batchnorm_on_last_hidden=self.use_batchnorm_on_last_hidden,
            **self.model_dump(include=set(TrainingConfig.model_fields)),
        )


class RunConfig(BaseModel):
    """Every training-run flag, named after the command-line options."""

    data: Optional[Path] = None
    image_dir: Optional[Path] = None
    archive_root: Optional[Path] = None

    label_choice: str = "Lightning"
    feature_set: FeatureSet = FeatureSet.WEATHER
    with_vegetation: bool = True
    satellite_img: bool = False
    gray_scale: bool = True
    resample_method: ResampleMethod = ResampleMethod.UNDERSAMPLING
    other_size: float = Field(default=1.8, gt=0.0)
    test_size: float = Field(default=0.2, gt=0.0, lt=1.0)
    archive: bool = True
    seed: int = 42
    model_selection: ModelKind = ModelKind.BASELINE
    loss_function: LossFunction = LossFunction.MSE
    learning_rate: float = Field(default=0.01, gt=0.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    epochs: int = Field(default=100, ge=1)
    display_step: int = Field(default=10, ge=1)
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    batch: Optional[bool] = None
    batch_size: Optional[int] = Field(default=None, ge=2)

    smote_k: int = Field(default=5, ge=1)
    smote_mode: SmoteMode = SmoteMode.STANDARD
    standardize: bool = True
    include_fire_size: bool = False
    vegetation_mapping: Optional[Path] = None

    @field_validator("label_choice")
    @classmethod
    def check_label_choice(cls, v: str) -> str:
        cause_code_for(v)
        return v

    @field_validator("smote_mode", mode="before")
    @classmethod
    def resolve_smote_mode(cls, v):
        return SmoteMode(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def check_combinations(self) -> "RunConfig":
        if self.batch_size is not None and self.batch is not True:
            raise ValueError("--batch-size requires --batch=True")
        if not self.gray_scale:
            raise ValueError("only grayscale imagery is supported (--gray-scale=True)")
        if self.model_selection == ModelKind.HYBRID:
            if not self.satellite_img:
                raise ValueError("'hybrid model' needs --satellite-img=True")
            if self.image_dir is None:
                raise ValueError("'hybrid model' needs an image directory (--image-dir)")
        return self

    @property
    def effective_batch_size(self) -> Optional[int]:
        """None means full-batch training."""
        if self.batch is False:
            return None
        if self.batch is True:
            return self.batch_size or 32
        return 32 if self.model_selection == ModelKind.HYBRID else None

    @property
    def tabular_dim(self) -> int:
        weather = 3 * len(self.feature_set.variables)
        return 2 + weather + (6 if self.with_vegetation else 0) + (1 if self.include_fire_size else 0)

    @property
    def positive_causes(self) -> List[int]:
        """Cause codes labelled 1."""
        return [cause_code_for(self.label_choice)]

    def training_fields(self) -> dict:
        return {
            "loss": self.loss_function,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "epochs": self.epochs,
            "batch_size": self.effective_batch_size,
            "threshold": self.threshold,
            "display_step": self.display_step,
        }

    def model_config_for(self, input_dim: int) -> TrainingConfig:
        if self.model_selection == ModelKind.HYBRID:
            return HybridConfig(tabular_dim=input_dim, **self.training_fields())
        return BaselineConfig(input_dim=input_dim, **self.training_fields())


def build_run_config(**values) -> RunConfig:
    """Validate raw flag values, turning validation failures into UsageError."""
    try:
        return RunConfig(**{k: v for k, v in values.items() if v is not None})
    except ValidationError as exc:
        messages = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in exc.errors()
        )
        raise UsageError(f"invalid configuration: {messages}") from exc
