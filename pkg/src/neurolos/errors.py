"""Exception hierarchy shared across the package."""


class NeurolosError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(NeurolosError, ValueError):
    """A configuration or specification value is out of contract.

    The message always names the offending field.
    """


class DataError(NeurolosError, RuntimeError):
    """Input data violates a structural requirement (keys, ranges, shapes)."""


class SchemaError(DataError):
    """A persisted artifact has a missing or incompatible schema."""


class TrainingError(NeurolosError, RuntimeError):
    """Model training failed (divergence, degenerate input)."""


class UnsupportedModelError(NeurolosError, TypeError):
    """The requested operation is undefined for this model kind."""
