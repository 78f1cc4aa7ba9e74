"""
Shared utilities for the wildfire-cause forecasting engine.
"""

from .type_conversion import to_python_type

__all__ = ["to_python_type"]
