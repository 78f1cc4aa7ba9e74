"""
Pydantic models for training logs.
"""

from typing import List, Optional

from pydantic import BaseModel


class EpochStats(BaseModel):
    """One row of the per-epoch loss file."""

    epoch: int
    loss: float
    train_acc: float
    test_acc: Optional[float] = None
    tpr: Optional[float] = None
    tnr: Optional[float] = None


class BatchLoss(BaseModel):
    """One mini-batch loss, also scaled by the batch's share of the training rows."""

    epoch: int
    batch: int
    rows: int
    loss: float
    scaled_loss: float


class TrainingLog(BaseModel):
    epochs: List[EpochStats] = []
    batches: List[BatchLoss] = []

    @property
    def losses(self) -> List[float]:
        return [e.loss for e in self.epochs]

    @property
    def final(self) -> Optional[EpochStats]:
        return self.epochs[-1] if self.epochs else None
