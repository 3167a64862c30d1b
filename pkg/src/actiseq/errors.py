"""Exception types shared across the package."""


class ActiseqError(Exception):
    """Base class for all package errors."""


class DataError(ActiseqError):
    """Invalid data: bad values, dimension mismatches, malformed files."""


class ConfigError(ActiseqError):
    """Invalid configuration values."""


class SamplingError(DataError):
    """Rejection sampling failed to produce a value within the retry cap."""
