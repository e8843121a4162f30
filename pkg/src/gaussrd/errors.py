"""Exception hierarchy shared by all modules."""


class GaussRDError(Exception):
    """Base class for errors raised by this package."""


class DomainError(GaussRDError, ValueError):
    """An argument lies outside the domain of a function."""


class PreconditionError(DomainError):
    """A quantity is undefined at the requested point (e.g. zero tilt)."""


class ValidationError(GaussRDError, ValueError):
    """A source model or configuration violates an invariant.

    ``field`` names the offending field when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CapabilityError(GaussRDError):
    """A model lacks the capability a routine needs (e.g. no analytic density)."""


class ConfigurationError(GaussRDError, ValueError):
    """Inconsistent combination of otherwise valid inputs."""


class DegenerateSourceError(DomainError):
    """The source has Var[X^2] = 0 where a positive dispersion is required."""


class ResourceError(GaussRDError):
    """A brute-force request exceeds the configured resource guard."""
