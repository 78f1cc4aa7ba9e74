"""
Evaluation metrics and Bayes composition.

Rates whose denominator is zero are reported as None rather than 0 so a
degenerate test split is visible in every report.
"""

from typing import Optional, Sequence

import numpy as np
from sklearn.metrics import auc as trapezoid_area

from app.exceptions import BayesDomainError, ClassError
from app.models.metrics import BayesComposition, BayesInputs, ConfusionMatrix, EvaluationReport, Rates, RocCurve
from app.utils.logging_config import get_logger
from app.utils.validators import validate_probability, validate_same_length

logger = get_logger("metrics")


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator > 0 else None


def confusion(preds: Sequence[bool], labels: Sequence[bool]) -> ConfusionMatrix:
    """Exact TP/FN/TN/FP counts."""
    validate_same_length(preds, labels, "predictions and labels")
    p = np.asarray(preds).astype(bool)
    y = np.asarray(labels).astype(bool)
    return ConfusionMatrix(
        tp=int((p & y).sum()),
        fn=int((~p & y).sum()),
        tn=int((~p & ~y).sum()),
        fp=int((p & ~y).sum()),
    )


def rates(cm: ConfusionMatrix) -> Rates:
    """
    TPR, TNR, FPR, accuracy, balanced accuracy, F-score and precision.

    F-score is tp / (tp + (fp + fn) / 2).
    """
    tpr = _ratio(cm.tp, cm.positives)
    tnr = _ratio(cm.tn, cm.negatives)
    balanced = (tpr + tnr) / 2 if tpr is not None and tnr is not None else None
    return Rates(
        tpr=tpr,
        tnr=tnr,
        fpr=_ratio(cm.fp, cm.negatives),
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
        balanced_accuracy=balanced,
        f_score=_ratio(cm.tp, cm.tp + 0.5 * (cm.fp + cm.fn)),
        precision=_ratio(cm.tp, cm.tp + cm.fp),
    )


def precision_from_rates(tpr: float, fpr: float, n: float) -> Optional[float]:
    """
    Precision from rates and the positive-class proportion n:

        TPR * n / (TPR * n + FPR * (1 - n))
    """
    tpr = validate_probability(tpr, "tpr")
    fpr = validate_probability(fpr, "fpr")
    n = validate_probability(n, "positive proportion")
    return _ratio(tpr * n, tpr * n + fpr * (1.0 - n))


def roc(probabilities: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """
    Sweep every distinct score as a threshold (predict positive when p >= t),
    from the highest down, and integrate with the trapezoid rule.

    Raises:
        ClassError: If labels contain a single class
    """
    validate_same_length(probabilities, labels, "scores and labels")
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    positives, negatives = int(y.sum()), int((~y).sum())
    if positives == 0 or negatives == 0:
        raise ClassError(f"ROC needs both classes (positives={positives}, negatives={negatives})")

    order = np.argsort(-p, kind="mergesort")
    scores, hits = p[order], y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(scores)), scores.size - 1]
    tps = np.cumsum(hits)[last_of_group]
    fps = np.cumsum(~hits)[last_of_group]

    fpr = np.r_[0.0, fps / negatives]
    tpr = np.r_[0.0, tps / positives]
    thresholds = np.r_[np.inf, scores[last_of_group]]
    return RocCurve(
        fpr=fpr.tolist(),
        tpr=tpr.tolist(),
        thresholds=thresholds.tolist(),
        auc=float(trapezoid_area(fpr, tpr)),
    )


def bayes_compose(b: BayesInputs) -> BayesComposition:
    """
    P(fire | cause, other) = P(cause | fire) P(fire | other) P(other) / P(cause, other).

    A result above 1 means the inputs are mutually inconsistent: it is reported
    as 1 with the inconsistency flag set and a warning logged.

    Raises:
        BayesDomainError: If P(cause, other) is 0
    """
    if b.p_cause_and_other <= 0.0:
        raise BayesDomainError("P(cause, other conditions) must be positive")
    value = b.p_cause_given_fire * b.p_fire_given_other * b.p_other / b.p_cause_and_other
    if value > 1.0:
        logger.warning(f"Inconsistent Bayes inputs: composed probability {value:.6f} exceeds 1")
        return BayesComposition(probability=1.0, raw=value, inconsistent=True)
    return BayesComposition(probability=value, raw=value)


def evaluation_report(probabilities: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> EvaluationReport:
    """Confusion matrix, rates and AUC at one threshold."""
    labels = np.asarray(labels).astype(bool)
    cm = confusion(np.asarray(probabilities) > threshold, labels)
    area = None
    if labels.any() and (~labels).any():
        area = roc(probabilities, labels).auc
    return EvaluationReport(confusion=cm, rates=rates(cm), auc=area, threshold=threshold, rows=int(labels.size))
