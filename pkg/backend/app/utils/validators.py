"""
Input validation utilities.

Small reusable checks shared by the pipeline, the metrics and the CLI. Each one
raises a domain error instead of returning a flag.
"""

import math
from typing import Sequence, Type

from app.exceptions import DataError, DimensionError, UsageError, WildfireError


def validate_probability(
    value: float,
    field_name: str = "probability",
    error: Type[WildfireError] = DataError,
) -> float:
    """
    Validate a probability lies in [0, 1].

    Args:
        value: Number to validate
        field_name: Name of the field for error messages
        error: Error class to raise

    Returns:
        The value as float

    Raises:
        error: If value is not a finite number in [0, 1]
    """
    value = float(value)
    if not math.isfinite(value) or not (0.0 <= value <= 1.0):
        raise error(f"Invalid {field_name}: {value}. Must be between 0 and 1.")
    return value


def validate_fraction(value: float, field_name: str = "fraction") -> float:
    """
    Validate an open-interval fraction, e.g. a test split size.

    Raises:
        UsageError: If value is not in (0, 1)
    """
    value = float(value)
    if not (0.0 < value < 1.0):
        raise UsageError(f"Invalid {field_name}: {value}. Must be strictly between 0 and 1.")
    return value


def validate_positive_int(value: int, field_name: str = "value") -> int:
    """
    Validate that an integer is positive.

    Raises:
        UsageError: If value is not a positive integer
    """
    if int(value) != value or value <= 0:
        raise UsageError(f"Invalid {field_name}: {value}. Must be a positive integer.")
    return int(value)


def validate_same_length(a: Sequence, b: Sequence, names: str = "inputs") -> int:
    """
    Validate two sequences have equal, non-zero length.

    Returns:
        The common length

    Raises:
        DimensionError: On length mismatch or empty input
    """
    if len(a) != len(b):
        raise DimensionError(f"Length mismatch between {names}: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise DimensionError(f"Empty {names}")
    return len(a)


def validate_latitude(value: float) -> float:
    if not -90.0 <= value <= 90.0:
        raise ValueError(f"latitude {value} outside [-90, 90]")
    return value


def validate_longitude(value: float) -> float:
    if not -180.0 <= value <= 180.0:
        raise ValueError(f"longitude {value} outside [-180, 180]")
    return value
