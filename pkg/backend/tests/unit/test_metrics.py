"""
Tests for confusion-matrix rates, ROC/AUC and Bayes composition.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import roc_auc_score

from app.exceptions import BayesDomainError, ClassError, DataError, DimensionError
from app.models.metrics import BayesInputs, ConfusionMatrix
from app.services.metrics import (
    bayes_compose,
    confusion,
    evaluation_report,
    precision_from_rates,
    rates,
    roc,
)


# -------------------------------------------------------------- confusion

def test_confusion_counts():
    cm = confusion([True, True, True, False, False], [True, True, True, False, False])

    assert (cm.tp, cm.fn, cm.tn, cm.fp) == (3, 0, 2, 0)


def test_confusion_all_negative_predictions():
    cm = confusion([False] * 4, [True, False, True, False])

    assert cm.tp == 0 and cm.fp == 0
    assert cm.fn == 2 and cm.tn == 2


def test_confusion_length_mismatch():
    with pytest.raises(DimensionError):
        confusion([True], [True, False])


def test_full_test_true_negative_rate():
    r = rates(ConfusionMatrix(tp=0, fn=0, tn=13885, fp=2458))

    assert r.tnr == pytest.approx(0.8496, abs=1e-4)
    assert r.tpr is None
    assert r.balanced_accuracy is None


# ------------------------------------------------------------------ rates

def test_precision_from_counts():
    r = rates(ConfusionMatrix(tp=787, fn=100, tn=1000, fp=245))

    assert r.precision == pytest.approx(0.7626, abs=1e-4)


def test_rates_definitions():
    cm = ConfusionMatrix(tp=8, fn=2, tn=6, fp=4)
    r = rates(cm)

    assert r.tpr == pytest.approx(0.8)
    assert r.tnr == pytest.approx(0.6)
    assert r.fpr == pytest.approx(0.4)
    assert r.accuracy == pytest.approx(0.7)
    assert r.balanced_accuracy == pytest.approx(0.7)
    assert r.f_score == pytest.approx(8 / (8 + 3))
    assert r.precision == pytest.approx(8 / 12)


def test_perfect_predictor_rates():
    r = rates(ConfusionMatrix(tp=5, fn=0, tn=7, fp=0))

    assert (r.tpr, r.tnr, r.accuracy, r.balanced_accuracy, r.f_score, r.precision) == (1, 1, 1, 1, 1, 1)


def test_undefined_rates_are_none_not_zero():
    r = rates(ConfusionMatrix(tp=0, fn=3, tn=0, fp=0))

    assert r.tpr == 0.0
    assert r.tnr is None
    assert r.fpr is None
    assert r.precision is None


@settings(max_examples=50, deadline=None)
@given(
    counts=st.tuples(*(st.integers(0, 500) for _ in range(4))),
    factor=st.integers(2, 5),
)
def test_rates_are_scale_free(counts, factor):
    tp, fn, tn, fp = counts
    base = rates(ConfusionMatrix(tp=tp, fn=fn, tn=tn, fp=fp))
    scaled = rates(ConfusionMatrix(tp=tp * factor, fn=fn * factor, tn=tn * factor, fp=fp * factor))

    for name, value in base.model_dump().items():
        if value is None:
            assert getattr(scaled, name) is None
        else:
            assert getattr(scaled, name) == pytest.approx(value, rel=1e-12)


# ----------------------------------------------- precision from rates

def test_precision_from_rates_values():
    assert precision_from_rates(0.85, 0.15, 0.05) == pytest.approx(0.2297, abs=1e-4)
    assert precision_from_rates(0.6, 0.0, 0.3) == 1.0
    assert precision_from_rates(0.6, 0.4, 1.0) == 1.0
    assert precision_from_rates(0.0, 0.0, 0.5) is None


def test_precision_from_rates_rejects_bad_input():
    with pytest.raises(DataError):
        precision_from_rates(1.5, 0.1, 0.2)


def test_precision_identity_over_random_matrices():
    """Closed-form precision equals the count-based precision on 1000 matrices."""
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        tp, fn, tn, fp = (int(v) for v in rng.integers(0, 1000, size=4))
        fn += 1 if tp + fn == 0 else 0
        tn += 1 if tn + fp == 0 else 0
        cm = ConfusionMatrix(tp=tp, fn=fn, tn=tn, fp=fp)
        r = rates(cm)
        closed = precision_from_rates(r.tpr, r.fpr, cm.positives / cm.total)

        if r.precision is None:
            assert closed is None
        else:
            assert abs(closed - r.precision) <= 1e-12


# -------------------------------------------------------------------- ROC

def test_roc_worked_example():
    """Three of the four positive/negative pairs are ordered correctly."""
    curve = roc([0.9, 0.8, 0.3, 0.1], [1, 0, 1, 0])

    assert curve.auc == pytest.approx(0.75)
    assert roc_auc_score([1, 0, 1, 0], [0.9, 0.8, 0.3, 0.1]) == pytest.approx(curve.auc)


def test_roc_separated_and_constant_scores():
    assert roc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]).auc == pytest.approx(1.0)
    assert roc([0.4] * 6, [1, 0, 1, 0, 0, 1]).auc == pytest.approx(0.5)


def test_roc_endpoints_and_monotone_fpr(rng):
    scores = rng.uniform(size=200)
    labels = rng.integers(0, 2, size=200)
    curve = roc(scores, labels)

    assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
    assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0.0)
    assert curve.auc == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)


def test_roc_auc_invariant_under_monotone_transform(rng):
    scores = rng.uniform(size=100)
    labels = rng.integers(0, 2, size=100)

    assert roc(np.exp(3 * scores), labels).auc == pytest.approx(roc(scores, labels).auc)


def test_roc_needs_both_classes():
    with pytest.raises(ClassError):
        roc([0.1, 0.2], [1, 1])


def test_evaluation_report_single_class_has_no_auc():
    report = evaluation_report(np.array([0.2, 0.9]), np.array([0, 0]), threshold=0.5)

    assert report.auc is None
    assert report.confusion.fp == 1
    assert report.rates.tpr is None


def test_evaluation_report_threshold_is_strict():
    report = evaluation_report(np.array([0.5, 0.7]), np.array([1, 1]), threshold=0.5)

    assert report.confusion.tp == 1
    assert report.confusion.fn == 1


# ------------------------------------------------------------------ Bayes

def test_bayes_trivial_cases():
    assert bayes_compose(BayesInputs(p_cause_given_fire=0.0, p_fire_given_other=0.4,
                                     p_other=0.5, p_cause_and_other=0.2)).probability == 0.0
    assert bayes_compose(BayesInputs(p_cause_given_fire=1.0, p_fire_given_other=1.0,
                                     p_other=1.0, p_cause_and_other=1.0)).probability == 1.0


def test_bayes_zero_denominator():
    with pytest.raises(BayesDomainError):
        bayes_compose(BayesInputs(p_cause_given_fire=0.5, p_fire_given_other=0.5,
                                  p_other=0.5, p_cause_and_other=0.0))


def test_bayes_inconsistent_inputs_are_flagged():
    result = bayes_compose(BayesInputs(p_cause_given_fire=1.0, p_fire_given_other=1.0,
                                       p_other=1.0, p_cause_and_other=0.5))

    assert result.inconsistent
    assert result.probability == 1.0
    assert result.raw == pytest.approx(2.0)


def test_bayes_round_trip_over_joint_tables():
    """
    Conditionals read off a joint table of (fire, cause, other), with cause
    and other independent given fire, compose back to P(fire | cause, other).
    """
    rng = np.random.default_rng(7)
    for _ in range(100):
        p_fire = rng.uniform(0.05, 0.95)
        p_cause = rng.uniform(0.05, 0.95, size=2)  # P(cause | fire = f)
        p_other = rng.uniform(0.05, 0.95, size=2)  # P(other | fire = f)
        joint = np.zeros((2, 2, 2))
        for f, pf in enumerate([1 - p_fire, p_fire]):
            for c in range(2):
                for o in range(2):
                    pc = p_cause[f] if c else 1 - p_cause[f]
                    po = p_other[f] if o else 1 - p_other[f]
                    joint[f, c, o] = pf * pc * po

        p_cause_and_other = joint[:, 1, 1].sum()
        inputs = BayesInputs(
            p_cause_given_fire=joint[1, 1, :].sum() / joint[1].sum(),
            p_fire_given_other=joint[1, :, 1].sum() / joint[:, :, 1].sum(),
            p_other=joint[:, :, 1].sum(),
            p_cause_and_other=p_cause_and_other,
        )
        result = bayes_compose(inputs)

        assert not result.inconsistent
        assert result.probability == pytest.approx(joint[1, 1, 1] / p_cause_and_other, rel=1e-12)


def test_bayes_is_increasing_in_model_likelihood():
    values = [
        bayes_compose(BayesInputs(p_cause_given_fire=p, p_fire_given_other=0.3,
                                  p_other=0.4, p_cause_and_other=0.5)).probability
        for p in np.linspace(0.0, 1.0, 21)
    ]

    assert np.all(np.diff(values) > 0.0)
