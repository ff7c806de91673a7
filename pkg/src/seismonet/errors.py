"""Exception types shared across the package."""


class SeismoNetError(Exception):
    """Base class for all errors raised by this package."""


class RecordFormatError(SeismoNetError):
    """A record, annotation, or checkpoint file is malformed."""


class ValidationError(SeismoNetError):
    """Inputs violate a documented precondition."""


class InsufficientDataError(ValidationError):
    """Not enough samples/windows to perform the requested operation."""


class ConfigError(SeismoNetError):
    """A configuration value or combination of values is invalid."""


class NumericError(SeismoNetError):
    """A non-finite value appeared where finite numbers are required."""
