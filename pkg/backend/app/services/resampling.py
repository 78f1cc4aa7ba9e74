"""
Resampling and train/test split plans.

Undersampling keeps every minority row, draws the majority down to a target
ratio, splits the balanced pool and spills the unsampled majority into the test
set. SMOTE splits first, then synthesises minority training rows along
nearest-neighbour segments.
"""

import math
from typing import Optional, Tuple

import numpy as np
from sklearn.neighbors import NearestNeighbors

from app.exceptions import ClassError, NeighborhoodError, SamplingError
from app.models.records import Dataset, ResampleMethod, SmoteMode, SplitPlan
from app.utils.logging_config import get_logger
from app.utils.validators import validate_fraction

logger = get_logger("data")


def _train_count(n: int, test_size: float) -> int:
    # guard against 0.8 * n landing a hair below an integer
    return int(math.floor(n * (1.0 - test_size) + 1e-9))


def _class_indices(labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    """Minority indices, majority indices and the minority label (ties go to 1)."""
    labels = np.asarray(labels)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    if pos.size == 0 or neg.size == 0:
        raise ClassError(f"both classes are required (positives={pos.size}, negatives={neg.size})")
    if pos.size <= neg.size:
        return pos, neg, 1
    return neg, pos, 0


def split_plan(n: int, test_size: float, seed: int) -> SplitPlan:
    """Plain shuffled split of n rows."""
    validate_fraction(test_size, "test size")
    order = np.random.default_rng(seed).permutation(n)
    n_train = _train_count(n, test_size)
    return SplitPlan(
        train_indices=order[:n_train].tolist(),
        test_indices=order[n_train:].tolist(),
        method=ResampleMethod.NONE,
        seed=seed,
        balanced_size=n,
    )


def undersample(labels: np.ndarray, ratio: float, seed: int, test_size: float = 0.2) -> SplitPlan:
    """
    Balance by drawing floor(minority * ratio) majority rows without replacement.

    Args:
        labels: 0/1 labels
        ratio: Majority rows kept per minority row (1.8 means 1:1.8)
        seed: RNG seed; fully determines membership
        test_size: Fraction of the balanced pool held out

    Returns:
        SplitPlan whose test set is the held-out balanced rows followed by
        every unsampled majority row

    Raises:
        SamplingError: If the ratio needs more majority rows than exist
    """
    validate_fraction(test_size, "test size")
    if ratio <= 0:
        raise SamplingError(f"ratio must be positive, got {ratio}")
    minority, majority, _ = _class_indices(labels)
    keep = int(math.floor(minority.size * ratio + 1e-9))
    if keep > majority.size:
        raise SamplingError(
            f"ratio 1:{ratio} needs {keep} majority rows but only {majority.size} exist"
        )

    rng = np.random.default_rng(seed)
    shuffled_majority = rng.permutation(majority)
    sampled, spill = shuffled_majority[:keep], shuffled_majority[keep:]
    balanced = rng.permutation(np.concatenate([minority, sampled]))
    n_train = _train_count(balanced.size, test_size)

    plan = SplitPlan(
        train_indices=balanced[:n_train].tolist(),
        test_indices=np.concatenate([balanced[n_train:], spill]).tolist(),
        method=ResampleMethod.UNDERSAMPLING,
        ratio=ratio,
        seed=seed,
        balanced_size=int(balanced.size),
        spill_size=int(spill.size),
    )
    logger.info(
        f"Undersampled 1:{ratio}: balanced {balanced.size} "
        f"(minority fraction {minority.size / balanced.size:.4f}), "
        f"train {n_train}, test {len(plan.test_indices)} incl. {spill.size} spilled"
    )
    return plan


def interpolate(x: np.ndarray, x_n: np.ndarray, u, mode: SmoteMode = SmoteMode.STANDARD) -> np.ndarray:
    """
    One SMOTE step from x towards its neighbour x_n.

    standard:       x + u * (x_n - x)
    absolute:       x + u * |x - x_n|
    """
    x = np.asarray(x, dtype=np.float64)
    x_n = np.asarray(x_n, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if SmoteMode(mode) == SmoteMode.ABSOLUTE:
        return x + u * np.abs(x - x_n)
    return x + u * (x_n - x)


def smote_pairs(
    minority: np.ndarray, k: int, amount: int, seed: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Pick (base, neighbour, u) triples for `amount` synthetic rows.

    Bases cycle through a seeded permutation of the minority rows; each
    neighbour is drawn uniformly from the base's k Euclidean nearest minority
    rows (itself excluded).

    Raises:
        NeighborhoodError: If k is not smaller than the minority count
    """
    minority = np.asarray(minority, dtype=np.float64)
    m = minority.shape[0]
    if k < 1 or k >= m:
        raise NeighborhoodError(f"k={k} neighbours need more than {k} minority rows, got {m}")

    _, found = NearestNeighbors(n_neighbors=k + 1).fit(minority).kneighbors(minority)
    neighbours = np.empty((m, k), dtype=np.int64)
    for i, row in enumerate(found):
        others = row[row != i]
        neighbours[i] = others[:k]

    rng = np.random.default_rng(seed)
    base = rng.permutation(m)[np.arange(amount) % m]
    chosen = neighbours[base, rng.integers(0, k, size=amount)]
    u = rng.random(amount)
    return base, chosen, u


def smote(
    minority: np.ndarray,
    k: int,
    amount: int,
    seed: int,
    mode: SmoteMode = SmoteMode.STANDARD,
) -> np.ndarray:
    """Generate `amount` synthetic minority rows."""
    minority = np.asarray(minority, dtype=np.float64)
    if amount <= 0:
        return np.zeros((0, minority.shape[1]))
    base, chosen, u = smote_pairs(minority, k, amount, seed)
    return interpolate(minority[base], minority[chosen], u[:, None], mode)


def resample_dataset(
    dataset: Dataset,
    method: ResampleMethod,
    seed: int,
    other_size: float = 1.8,
    test_size: float = 0.2,
    k: int = 5,
    mode: SmoteMode = SmoteMode.STANDARD,
) -> Tuple[Dataset, SplitPlan]:
    """
    Produce the (possibly augmented) dataset and its split plan.

    SMOTE grows the training minority until it reaches majority / other_size;
    synthetic rows are appended after the originals (id -1) and only ever
    enter the training set.
    """
    method = ResampleMethod(method)
    if method == ResampleMethod.UNDERSAMPLING:
        return dataset, undersample(dataset.labels, other_size, seed, test_size)

    plan = split_plan(len(dataset), test_size, seed)
    if method == ResampleMethod.NONE:
        return dataset, plan

    _class_indices(dataset.labels)
    train = np.asarray(plan.train_indices, dtype=np.int64)
    train_labels = dataset.labels[train]
    minority_label = 1 if (train_labels == 1).sum() <= (train_labels == 0).sum() else 0
    minority_rows = train[train_labels == minority_label]
    majority_count = int((train_labels != minority_label).sum())
    target = int(math.ceil(majority_count / other_size))
    amount = max(0, target - minority_rows.size)
    if amount == 0 or minority_rows.size == 0:
        logger.info("SMOTE: training minority already at target, no rows synthesised")
        return dataset, plan.model_copy(update={"method": ResampleMethod.SMOTE, "ratio": other_size})

    base, chosen, u = smote_pairs(dataset.features[minority_rows], k, amount, seed)
    new_features = interpolate(
        dataset.features[minority_rows[base]], dataset.features[minority_rows[chosen]], u[:, None], mode
    )
    new_images = None
    if dataset.images is not None:
        new_images = np.clip(
            interpolate(
                dataset.images[minority_rows[base]],
                dataset.images[minority_rows[chosen]],
                u[:, None, None],
                mode,
            ),
            0.0,
            1.0,
        )

    n = len(dataset)
    augmented = Dataset(
        features=np.vstack([dataset.features, new_features]),
        labels=np.concatenate([dataset.labels, np.full(amount, minority_label, dtype=dataset.labels.dtype)]),
        ids=np.concatenate([dataset.ids, np.full(amount, -1, dtype=dataset.ids.dtype)]),
        columns=list(dataset.columns),
        images=None if dataset.images is None else np.concatenate([dataset.images, new_images]),
    )
    plan = SplitPlan(
        train_indices=plan.train_indices + list(range(n, n + amount)),
        test_indices=plan.test_indices,
        method=ResampleMethod.SMOTE,
        ratio=other_size,
        seed=seed,
        balanced_size=n + amount,
    )
    logger.info(f"SMOTE ({SmoteMode(mode).value}, k={k}): synthesised {amount} minority training rows")
    return augmented, plan


def apply_plan(dataset: Dataset, plan: SplitPlan) -> Tuple[Dataset, Dataset]:
    """Materialise the train and test subsets of a plan."""
    return dataset.subset(plan.train_indices), dataset.subset(plan.test_indices)


def plan_from_index(train_indices, test_indices, seed: int, method: Optional[str] = None) -> SplitPlan:
    return SplitPlan(
        train_indices=[int(i) for i in train_indices],
        test_indices=[int(i) for i in test_indices],
        method=ResampleMethod(method or ResampleMethod.NONE),
        seed=seed,
    )
