"""Exception types shared across the package."""


class FedEvalError(Exception):
    """Base class for all fedeval-specific errors."""


class ConfigError(FedEvalError):
    """Invalid, missing, or unknown configuration content."""


class DataFormatError(FedEvalError):
    """Malformed binary dataset input."""


class NumericError(FedEvalError):
    """Non-finite values encountered during training (divergence)."""


class UndefinedMetricError(FedEvalError):
    """A metric is undefined for the given inputs (e.g. every client excluded)."""
