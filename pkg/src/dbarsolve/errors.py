"""Exception hierarchy shared by every module of the package."""


class DbarError(Exception):
    """Base class for all errors raised by dbarsolve."""


class DomainError(DbarError):
    """A point or domain violates a membership or validity requirement."""


class SingularityError(DbarError):
    """A kernel was evaluated on its singular set."""


class NearBoundaryError(DbarError):
    """An evaluation point is too close to the boundary for the requested accuracy."""


class ClosednessError(DbarError):
    """A (0,1)-form is not dbar-closed."""


class UnsupportedError(DbarError):
    """The requested variant or domain type is not supported by an operation."""


class PoisonedResultError(DbarError):
    """A quadrature integrand produced a non-finite value."""


class ConfigError(DbarError):
    """A configuration file or textual format could not be parsed."""
