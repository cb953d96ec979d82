"""Shared exception types."""


class InvalidRank(ValueError):
    """Algebra rank outside the supported range (n >= 2)."""


class UnsupportedRepresentation(ValueError):
    """Representation kind not available for this algebra."""


class ShapeError(ValueError):
    """Array argument has the wrong shape for the requested operation."""


class SingularMetric(ValueError):
    """A metric block failed the positivity / conditioning check."""


class GluingError(ValueError):
    """Chart-overlap data is inconsistent or missing."""


class ClassificationRefused(RuntimeError):
    """Field configuration too far from the constraint set to classify."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
