"""
Type conversion utilities for numpy/pandas to native Python types.
"""

import numpy as np
import pandas as pd
from typing import Any


def to_python_type(value: Any) -> Any:
    """
    Convert numpy/pandas types to native Python types for JSON serialization.

    Containers are converted recursively so manifests and parameter files can be
    written with the standard json encoder.

    Args:
        value: Any value that might be a numpy/pandas type

    Returns:
        Native Python type equivalent
    """
    if isinstance(value, dict):
        return {str(k): to_python_type(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_python_type(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if value is None:
        return None
    if isinstance(value, float) and np.isnan(value):
        return None
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return None if np.isnan(value) else float(value)
    if isinstance(value, np.str_):
        return str(value)
    if isinstance(value, pd.Timestamp):
        return value.isoformat()
    if isinstance(value, (str, int, float)):
        return value
    try:
        if pd.isna(value):
            return None
    except (TypeError, ValueError):
        pass
    return value
