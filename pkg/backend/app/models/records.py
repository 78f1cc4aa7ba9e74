"""
Pydantic models for fire records, weather series, images and splits.
"""

import math
from datetime import date, datetime
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import IMAGE_SIZE, NWCG_CAUSES, WEATHER_VARIABLES
from app.utils.validators import validate_latitude, validate_longitude


class FireRecord(BaseModel):
    """One wildfire occurrence with its weather aggregates and vegetation."""

    fod_id: int = Field(..., description="Global unique identifier")
    latitude: float = Field(..., description="Latitude (NAD83)")
    longitude: float = Field(..., description="Longitude (NAD83)")
    discovery_date: date
    cause_code: int = Field(..., description="NWCG cause code")
    fire_size: Optional[float] = Field(None, ge=0.0, description="Acres")
    vegetation_category: int = Field(..., ge=1, le=28)
    weather: List[float] = Field(default_factory=list, description="12 trailing-window means")

    @field_validator("latitude")
    @classmethod
    def check_latitude(cls, v: float) -> float:
        return validate_latitude(v)

    @field_validator("longitude")
    @classmethod
    def check_longitude(cls, v: float) -> float:
        return validate_longitude(v)

    @field_validator("cause_code")
    @classmethod
    def check_cause(cls, v: int) -> int:
        if v not in NWCG_CAUSES:
            raise ValueError(f"unknown cause code {v}")
        return v


class WeatherSeries(BaseModel):
    """Hourly surface observations; missing hours are None."""

    timestamps: List[datetime]
    temp: List[Optional[float]]
    wind: List[Optional[float]]
    humid: List[Optional[float]]
    precip: List[Optional[float]]

    @model_validator(mode="after")
    def check_series(self) -> "WeatherSeries":
        n = len(self.timestamps)
        for name in ("temp", "wind", "humid", "precip"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} values for {n} timestamps")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be strictly increasing")
        if any(h is not None and not 0.0 <= h <= 100.0 for h in self.humid):
            raise ValueError("humidity must lie in [0, 100]")
        if any(p is not None and p < 0.0 for p in self.precip):
            raise ValueError("precipitation must be non-negative")
        return self


class FeatureSet(str, Enum):
    """Weather variables on the tabular row; vegetation is switched separately."""

    TEMP_WIND = "t_w"
    WEATHER = "t_w_h_p"

    @property
    def variables(self) -> List[str]:
        if self is FeatureSet.TEMP_WIND:
            return ["temp", "wind"]
        return list(WEATHER_VARIABLES)


class FeatureVector(BaseModel):
    """Fixed-width numeric encoding of a record plus its label."""

    values: List[float]
    label: int = Field(..., ge=0, le=1)

    @field_validator("values")
    @classmethod
    def check_finite(cls, v: List[float]) -> List[float]:
        if not all(math.isfinite(x) for x in v):
            raise ValueError("feature values must be finite")
        return v


class GrayImage(BaseModel):
    """100x100 grayscale tile with values in [0, 1]."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    pixels: np.ndarray
    source_id: int

    @field_validator("pixels")
    @classmethod
    def check_pixels(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (IMAGE_SIZE, IMAGE_SIZE):
            raise ValueError(f"image must be {IMAGE_SIZE}x{IMAGE_SIZE}, got {v.shape}")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        return v


class ResampleMethod(str, Enum):
    """Training-set balancing strategies."""

    NONE = "none"
    UNDERSAMPLING = "undersampling"
    SMOTE = "smote"


class SmoteMode(str, Enum):
    """SMOTE interpolation rules; ``paper_literal`` is accepted as another name for ``absolute``."""

    STANDARD = "standard"
    ABSOLUTE = "absolute"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            alias = SMOTE_MODE_ALIASES.get(value.strip().lower())
            if alias is not None:
                return cls(alias)
        return None


SMOTE_MODE_ALIASES = {"paper_literal": "absolute"}


class SplitPlan(BaseModel):
    """Train/test membership over the post-resample population."""

    train_indices: List[int]
    test_indices: List[int]
    method: ResampleMethod
    ratio: Optional[float] = None
    seed: int
    balanced_size: Optional[int] = None
    spill_size: int = 0

    @model_validator(mode="after")
    def check_disjoint(self) -> "SplitPlan":
        if set(self.train_indices) & set(self.test_indices):
            raise ValueError("train and test indices overlap")
        return self


class ParsedRecords(BaseModel):
    """Result of parsing a fire-record CSV."""

    records: List[FireRecord]
    dropped: int = 0


class Dataset(BaseModel):
    """Feature matrix, labels and optional images, row-aligned."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    features: np.ndarray
    labels: np.ndarray
    ids: np.ndarray
    columns: List[str]
    images: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def check_alignment(self) -> "Dataset":
        n = self.features.shape[0]
        if self.labels.shape[0] != n or self.ids.shape[0] != n:
            raise ValueError("features, labels and ids must have equal length")
        if self.features.shape[1] != len(self.columns):
            raise ValueError("column names do not match the feature width")
        if self.images is not None and self.images.shape[0] != n:
            raise ValueError("images must align with feature rows")
        return self

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def width(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            ids=self.ids[indices],
            columns=list(self.columns),
            images=None if self.images is None else self.images[indices],
        )
