"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid experiment, topology or solver configuration."""


class DomainError(ValueError):
    """An argument lies outside an operation's domain."""


class NumericalDomainError(DomainError):
    """A matrix argument is numerically unusable (singular or indefinite)."""
