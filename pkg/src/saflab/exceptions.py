"""Exception types shared across the package."""


class SafLabError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SafLabError, ValueError):
    """Tensor or matrix dimensions do not line up."""


class ConfigError(SafLabError, ValueError):
    """Invalid configuration value, unknown key, or inconsistent dimensions."""


class DataError(SafLabError, ValueError):
    """Invalid data: bad labels, empty batches, non-normalized distributions."""


class StateError(SafLabError, RuntimeError):
    """Operation attempted in an invalid state (e.g. missing gradients)."""


class CsvParseError(DataError):
    """Malformed CSV input; the message names the offending row."""
