"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when user-supplied parameters are inconsistent or out of range."""


class EnumerationLimitError(RuntimeError):
    """Raised when a strategy-space enumeration would exceed its configured cap."""
