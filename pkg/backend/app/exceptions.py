"""
Error hierarchy for the wildfire-cause forecasting engine.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class WildfireError(Exception):
    """Base class for all engine errors."""

    exit_code: int = 1

    def __init__(self, message: str, detail: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


# ---------------------------------------------------------------- usage (2)

class UsageError(WildfireError):
    """Invalid flag or configuration combination."""

    exit_code = 2


# ----------------------------------------------------------------- data (3)

class DataError(WildfireError):
    """Input data could not be used."""

    exit_code = 3


class RecordParseError(DataError):
    """Malformed CSV input."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}", {"line": line})
        self.line = line


class RecordValidationError(DataError):
    """A record carries a value outside its domain."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}", {"line": line})
        self.line = line


class WeatherCoverageError(DataError):
    """Too many missing hours in a trailing weather window."""

    def __init__(self, variable: str, window_days: int, missing_fraction: float):
        super().__init__(
            f"{variable} {window_days}-day window is {missing_fraction:.0%} missing",
            {"variable": variable, "window_days": window_days},
        )
        self.variable = variable
        self.window_days = window_days


class EncodingError(DataError):
    """Invalid categorical or one-hot encoding."""


class ImageError(DataError):
    """Unreadable image or wrong image dimensions."""


class ImageJoinError(DataError):
    """Rows without a matching image tile."""

    def __init__(self, missing: list):
        shown = ", ".join(str(m) for m in missing[:20])
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        super().__init__(f"no image for: {shown}{more}", {"missing": list(missing)})
        self.missing = list(missing)


class SamplingError(DataError):
    """Requested resampling ratio cannot be met."""


class NeighborhoodError(DataError):
    """SMOTE neighbourhood larger than the minority class."""


class SchemaError(DataError):
    """Feature width disagrees with the checkpoint."""


class ClassError(DataError):
    """Both classes are required."""


class BayesDomainError(DataError):
    """Bayes composition with a zero denominator."""


# -------------------------------------------------------------- numeric (4)

class NumericalError(WildfireError):
    """NaN or Inf produced by a forward operation."""

    exit_code = 4


class DivergenceError(NumericalError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: str = "loss is not finite"):
        super().__init__(f"epoch {epoch}: {message}", {"epoch": epoch})
        self.epoch = epoch


# ------------------------------------------------------------ integrity (5)

class IntegrityError(WildfireError):
    """Checkpoint container is damaged."""

    exit_code = 5


class CheckpointVersionError(IntegrityError):
    """Checkpoint written by an unsupported format version."""


class ManifestError(IntegrityError):
    """Manifest disagrees with the payload or the model."""


class ChecksumError(IntegrityError):
    """Payload checksum mismatch."""


# --------------------------------------------------------------- engine (1)

class ModelError(WildfireError):
    """Misuse of the tensor engine or a model."""


class DimensionError(ModelError):
    """Operand shapes are incompatible."""


class ConfigurationError(ModelError):
    """Layer hyperparameters produce an empty output."""


class BatchSizeError(ModelError):
    """Batch too small for batch statistics."""


class TapeError(ModelError):
    """Backward called on an invalid tape or loss."""


class OptimizerError(ModelError):
    """Optimizer invoked without gradients or with bad hyperparameters."""
