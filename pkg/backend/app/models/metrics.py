"""
Pydantic models for evaluation metrics, Bayes composition and probability grids.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class ConfusionMatrix(BaseModel):
    """Counts at a single decision threshold."""

    tp: int = Field(..., ge=0)
    fn: int = Field(..., ge=0)
    tn: int = Field(..., ge=0)
    fp: int = Field(..., ge=0)

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.positives + self.negatives


class Rates(BaseModel):
    """Derived rates; None marks a rate whose denominator is zero."""

    tpr: Optional[float] = None
    tnr: Optional[float] = None
    fpr: Optional[float] = None
    accuracy: Optional[float] = None
    balanced_accuracy: Optional[float] = None
    f_score: Optional[float] = None
    precision: Optional[float] = None


class RocCurve(BaseModel):
    """Threshold sweep from (0, 0) to (1, 1)."""

    fpr: List[float]
    tpr: List[float]
    thresholds: List[float]
    auc: float = Field(..., ge=0.0, le=1.0)


class BayesInputs(BaseModel):
    """Terms of P(fire | cause, other) = P(cause | fire) P(fire | other) P(other) / P(cause, other)."""

    p_cause_given_fire: float = Field(..., ge=0.0, le=1.0)
    p_fire_given_other: float = Field(..., ge=0.0, le=1.0)
    p_other: float = Field(..., ge=0.0, le=1.0)
    p_cause_and_other: float = Field(..., ge=0.0, le=1.0)


class BayesComposition(BaseModel):
    """Composed probability; `raw` keeps the unclamped value."""

    probability: float
    raw: float
    inconsistent: bool = False


class EvaluationReport(BaseModel):
    """Everything ``eval`` prints for one split."""

    confusion: ConfusionMatrix
    rates: Rates
    auc: Optional[float] = None
    threshold: float
    rows: int


class ProbabilityGrid(BaseModel):
    """Per-tile probabilities over a rows x cols block anchored at its north-west corner."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    origin_lat: float
    origin_lon: float
    rows: int = Field(..., ge=1)
    cols: int = Field(..., ge=1)
    cell_size_m: float = 100.0
    flag_threshold: float = 0.70
    probabilities: np.ndarray

    @field_validator("probabilities")
    @classmethod
    def check_probabilities(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("probabilities must be a rows x cols array")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        return v

    @property
    def flags(self) -> np.ndarray:
        return self.probabilities > self.flag_threshold
