"""Exception types shared across the package."""


class HmtlError(Exception):
    """Base class for package errors."""


class DataError(HmtlError):
    """Malformed input file or annotation violating a document invariant."""


class ConfigError(HmtlError):
    """Invalid run configuration (maps to CLI exit code 2)."""
