"""Exception hierarchy shared by all qpsim modules."""


class QpsimError(Exception):
    """Base class for every error raised by qpsim."""


class CapacityError(QpsimError):
    """A state would exceed the configured maximum photon number."""


class ParameterError(QpsimError, ValueError):
    """An element or scenario parameter is out of its valid range."""


class PathError(QpsimError):
    """A circuit references a path that does not exist at that point."""


class ConfigurationError(QpsimError):
    """Malformed circuit, detector or tomography configuration."""


class DomainError(QpsimError, ValueError):
    """Input is outside the domain of the requested operation."""


class DataError(QpsimError, ValueError):
    """Count data or reconstruction inputs are unusable."""


class ConvergenceError(QpsimError):
    """An optimizer failed to converge; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
