"""Exception types shared across the package."""


class NvPropiError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NvPropiError, ValueError):
    """Raised when a requested configuration exceeds a cap or is malformed."""


class DomainError(NvPropiError, ValueError):
    """Raised when an argument lies outside the validity domain of a model."""
