"""
Custom exceptions for the DBM loss laboratory.
"""


class DbmLabError(Exception):
    """Base exception for the DBM loss laboratory."""
    pass


class ConfigurationError(DbmLabError):
    """Raised when a configuration value violates its invariants."""
    pass


class InvalidDimsError(ConfigurationError):
    """Raised when network dimensions cannot be composed."""
    pass


class NumericalError(DbmLabError):
    """Raised when a computation leaves its numerically valid domain."""
    pass


class ZeroVectorError(NumericalError):
    """Raised when a vector with (numerically) zero norm must be normalized."""
    pass


class NonFiniteLossError(NumericalError):
    """Raised when training produces a NaN or infinite loss."""

    def __init__(self, epoch: int, batch: int, value: float):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(f"Non-finite loss {value} at epoch {epoch}, batch {batch}")


class SingularScatterError(NumericalError):
    """Raised when the regularized within-class scatter is numerically singular."""
    pass


class DegenerateVarianceError(NumericalError):
    """Raised when projected classes have zero spread but different means."""
    pass


class ShapeError(DbmLabError):
    """Raised when array shapes or lengths disagree."""
    pass


class ShapeMismatchError(ShapeError):
    """Raised when a batch does not match the model input width."""
    pass


class StaleCacheError(ShapeError):
    """Raised when a forward cache does not belong to the model or gradients at hand."""
    pass


class DimMismatchError(ShapeError):
    """Raised when a checkpoint and a dataset disagree on dimensions."""
    pass


class LengthMismatchError(ShapeError):
    """Raised when paired sequences have different lengths."""
    pass


class IndexOutOfRangeError(ShapeError):
    """Raised when a class index is outside [0, C)."""
    pass


class DatasetError(DbmLabError):
    """Raised when a dataset cannot be built or read."""
    pass


class ParseError(DatasetError):
    """Raised when a dataset file is malformed."""

    def __init__(self, message: str, line: int = None, offset: int = None):
        self.line = line
        self.offset = offset
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class CountMismatchError(DatasetError):
    """Raised when declared class counts disagree with the stored labels."""
    pass


class CenterSamplingFailedError(DatasetError):
    """Raised when well-separated class centers cannot be drawn."""
    pass


class InsufficientSamplesError(DatasetError):
    """Raised when a class has too few samples for a statistic."""
    pass


class CheckpointError(DbmLabError):
    """Raised when a checkpoint cannot be written or read."""
    pass


class GradientCheckFailed(DbmLabError):
    """Raised when analytic gradients disagree with finite differences."""
    pass
