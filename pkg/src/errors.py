"""
Exception hierarchy for the SuperMAN toolkit.

Every error carries the process exit code the CLI reports for it:
2 for configuration problems, 3 for data problems, 4 for numerical failures.
"""

from typing import Any, Optional


class SupermanError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(SupermanError):
    """Invalid configuration or hyperparameters."""

    exit_code = 2


class InvalidConfig(ConfigError):
    """An individual option value is out of range."""


class DataError(SupermanError):
    """Input data violates the expected structure."""

    exit_code = 3


class InvalidShape(DataError):
    """Tensor dimensions do not line up."""


class EmptySignal(DataError):
    """A signal graph was requested from zero measurements."""


class ParseError(DataError):
    """A row of an input file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(DataError):
    """A signal type or column is not part of the declared schema."""


class PartitionError(DataError):
    """A subset partition is not a disjoint cover or mixes incompatible signals."""


class InvalidNode(DataError):
    """A node index is out of range for its graph."""


class NotNodeAttributable(DataError):
    """Node or graph contributions requested for a non-linearly mixed subset."""


class DegenerateDirection(DataError):
    """The pooled feature matrix has no principal direction."""


class MetricUndefined(DataError):
    """A ranking metric needs both classes present."""


class InvalidMetric(DataError):
    """A distance matrix is not symmetric, nonnegative or zero on the diagonal."""


class NotAPathMetric(DataError):
    """A distance matrix is not realised by any weighted path."""


class DegenerateWeights(DataError):
    """Path reconstruction implies a zero-weight edge."""


class NumericalError(SupermanError):
    """A non-finite value appeared during evaluation or training."""

    exit_code = 4

    def __init__(self, message: str, checkpoint: Any = None):
        super().__init__(message)
        self.checkpoint = checkpoint
