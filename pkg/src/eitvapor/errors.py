"""Exception and warning types shared across the package."""


class EITError(Exception):
    """Base class for all errors raised by eitvapor."""


class ParameterError(EITError, ValueError):
    """A physical parameter violates a type invariant."""


class UnitError(EITError, ValueError):
    pass


class SingularConfigurationError(EITError, ArithmeticError):
    """A closed-form expression hit an exactly vanishing denominator."""


class DegenerateSteadyStateError(EITError):
    """The stationary Bloch equations do not have a unique solution.

    ``null_direction`` maps Bloch-vector component names to the entries of the
    (normalised) null vector.
    """

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = dict(null_direction or {})


class IntegrationError(EITError):
    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class ResolutionError(EITError, ValueError):
    """A detuning grid is too coarse for the requested derivative/convolution."""


class NoResonanceError(EITError):
    """No transparency dip could be located in a spectrum."""


class FitError(EITError, ValueError):
    pass


class ConfigError(EITError, ValueError):
    """Invalid scenario configuration. ``path`` addresses the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class EITWarning(UserWarning):
    """Non-fatal numerical or physical caveat attached to a result."""
