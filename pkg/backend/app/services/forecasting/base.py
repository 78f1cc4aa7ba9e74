"""
Base cause-model class.

Abstract base class that holds everything the baseline and hybrid networks
share: output heads, loss selection, the Adam training loop with divergence
guard, batched inference and evaluation.
"""

from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from app.exceptions import ClassError, DivergenceError, DimensionError, NumericalError
from app.models.configs import LossFunction, ModelKind, TrainingConfig
from app.models.metrics import EvaluationReport
from app.models.records import Dataset
from app.models.training import BatchLoss, EpochStats, TrainingLog
from app.nn import Adam, Module, Tape, Tensor
from app.nn import functional as F
from app.utils.logging_config import get_logger

logger = get_logger("training")

EVAL_BATCH_SIZE = 256


class CauseModel(Module, ABC):
    """Abstract base class for all natural-cause classifiers."""

    name: str = "Base Model"
    kind: ModelKind = ModelKind.BASELINE
    uses_images: bool = False

    def __init__(self, config: TrainingConfig, seed: int = 0):
        super().__init__()
        self.config = config
        self.seed = seed

    @property
    def output_width(self) -> int:
        return 2 if self.config.loss == LossFunction.CROSS_ENTROPY else 1

    @abstractmethod
    def forward(self, features: Tensor, images: Optional[Tensor] = None) -> Tensor:
        """
        Raw head output.

        Args:
            features: (B, d) tabular rows
            images: (B, 1, 100, 100) tiles when the model uses images

        Returns:
            (B, 1) logits for MSE, (B, 2) logits for cross-entropy
        """
        pass

    # ------------------------------------------------------------ heads

    def probabilities(self, out: Tensor) -> Tensor:
        """Natural-cause probability per row, shape (B,)."""
        if self.config.loss == LossFunction.CROSS_ENTROPY:
            return F.softmax_rows(out)[:, 1]
        return F.sigmoid(out.reshape(-1))

    def loss(self, out: Tensor, labels: np.ndarray) -> Tensor:
        if self.config.loss == LossFunction.CROSS_ENTROPY:
            return F.cross_entropy_loss(out, F.one_hot(labels, 2))
        return F.mse_loss(self.probabilities(out), labels.astype(np.float64))

    # -------------------------------------------------------- inference

    def _inputs(self, features: np.ndarray, images: Optional[np.ndarray]):
        x = Tensor(features)
        if not self.uses_images:
            return x, None
        if images is None:
            raise DimensionError(f"{self.name} needs an image for every row")
        if images.shape[0] != features.shape[0]:
            raise DimensionError(f"{features.shape[0]} rows but {images.shape[0]} images")
        return x, Tensor(images.reshape(images.shape[0], 1, *images.shape[-2:]))

    def predict_proba(
        self,
        features: np.ndarray,
        images: Optional[np.ndarray] = None,
        batch_size: int = EVAL_BATCH_SIZE,
    ) -> np.ndarray:
        """Eval-mode probabilities, computed in fixed-size row blocks."""
        self.eval()
        out: List[np.ndarray] = []
        for start in range(0, features.shape[0], batch_size):
            stop = start + batch_size
            x, img = self._inputs(features[start:stop], None if images is None else images[start:stop])
            out.append(self.probabilities(self.forward(x, img)).data.copy())
        return np.concatenate(out) if out else np.zeros(0)

    def predict(self, features: np.ndarray, images: Optional[np.ndarray] = None) -> np.ndarray:
        return self.predict_proba(features, images) > self.config.threshold

    def evaluate(self, dataset: Dataset) -> EvaluationReport:
        from app.services.metrics import evaluation_report

        probs = self.predict_proba(dataset.features, dataset.images)
        return evaluation_report(probs, dataset.labels, self.config.threshold)

    # --------------------------------------------------------- training

    def fit(self, train: Dataset, test: Optional[Dataset] = None, seed: Optional[int] = None) -> TrainingLog:
        """
        Adam descent over the training rows.

        Full-batch when config.batch_size is None, otherwise shuffled
        mini-batches; a trailing batch of one row is skipped because batch
        norm cannot normalise it.

        Raises:
            ClassError: If the training rows lack a class
            DivergenceError: If a forward value or the loss becomes non-finite
        """
        seed = self.seed if seed is None else seed
        labels = np.asarray(train.labels)
        if not ((labels == 1).any() and (labels == 0).any()):
            raise ClassError("training rows must contain both classes")

        cfg = self.config
        rng = np.random.default_rng(seed)
        optimizer = Adam(self.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
        log = TrainingLog()
        n = len(train)

        logger.info(
            f"Training {self.name}: {n} rows, {cfg.epochs} epochs, "
            f"{'full batch' if cfg.batch_size is None else f'batch size {cfg.batch_size}'}, "
            f"loss {cfg.loss.value}"
        )

        for epoch in range(cfg.epochs):
            self.train()
            if cfg.batch_size is None:
                batches = [np.arange(n)]
            else:
                order = rng.permutation(n)
                batches = [order[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]

            loss_sum, rows_seen, correct = 0.0, 0, 0
            for b, idx in enumerate(batches):
                if idx.size < 2:
                    logger.warning(f"Epoch {epoch}: skipping trailing batch of {idx.size} row")
                    continue
                x, img = self._inputs(train.features[idx], None if train.images is None else train.images[idx])
                try:
                    with Tape() as tape:
                        out = self.forward(x, img)
                        loss = self.loss(out, labels[idx])
                    tape.backward(loss)
                    optimizer.step()
                except NumericalError as exc:
                    raise DivergenceError(epoch, str(exc)) from exc

                value = loss.item()
                if not np.isfinite(value):
                    raise DivergenceError(epoch)
                log.batches.append(
                    BatchLoss(epoch=epoch, batch=b, rows=int(idx.size), loss=value,
                              scaled_loss=value * idx.size / n)
                )
                loss_sum += value * idx.size
                rows_seen += idx.size
                preds = self.probabilities(out).data > cfg.threshold
                correct += int((preds == (labels[idx] == 1)).sum())

            stats = EpochStats(epoch=epoch, loss=loss_sum / rows_seen, train_acc=correct / rows_seen)
            if test is not None and len(test):
                report = self.evaluate(test)
                stats.test_acc = report.rates.accuracy
                stats.tpr = report.rates.tpr
                stats.tnr = report.rates.tnr
            log.epochs.append(stats)

            if epoch == 0 or (epoch + 1) % cfg.display_step == 0 or epoch == cfg.epochs - 1:
                logger.info(
                    f"epoch {epoch + 1}/{cfg.epochs} loss={stats.loss:.5f} "
                    f"train_acc={stats.train_acc:.4f}"
                    + (f" test_acc={stats.test_acc:.4f}" if stats.test_acc is not None else "")
                )

        self.eval()
        return log
