"""Exception hierarchy shared by all modules."""


class SdsError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(SdsError):
    """Malformed spec, config file, or plan (bad weights, non-monotone grid, ...)."""


class DomainError(SdsError):
    """Input outside the mathematical domain of an operation."""


class UnsupportedError(SdsError):
    """Operation deliberately not provided for this family/variant."""


class IdentityViolation(SdsError):
    """An exact identity that must hold was violated; indicates a real bug."""
