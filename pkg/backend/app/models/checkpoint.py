"""
Pydantic models for the checkpoint container.
"""

from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class TensorEntry(BaseModel):
    """Location of one tensor inside the payload, in float64 elements."""

    name: str
    shape: List[int]
    offset: int = Field(..., ge=0)
    count: int = Field(..., ge=0)
    role: Literal["param", "buffer"]


class StandardizerState(BaseModel):
    mean: List[float]
    std: List[float]


class CheckpointManifest(BaseModel):
    """Text header of a checkpoint file."""

    format_version: int
    kind: str
    config: Dict[str, Any]
    seed: int
    feature_columns: List[str] = []
    positive_causes: List[int] = [1]
    standardizer: Optional[StandardizerState] = None
    log_digest: Optional[str] = None
    tensors: List[TensorEntry]
    payload_sha256: str


class ModelCheckpoint(BaseModel):
    """A trained model's parameters, buffers and everything needed to rebuild it."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    format_version: int = 1
    kind: str
    config: Dict[str, Any]
    seed: int
    feature_columns: List[str] = []
    positive_causes: List[int] = [1]
    standardizer: Optional[StandardizerState] = None
    log_digest: Optional[str] = None
    params: Dict[str, np.ndarray]
    buffers: Dict[str, np.ndarray] = {}

    def state(self) -> Dict[str, np.ndarray]:
        return {**self.params, **self.buffers}
