"""Exception hierarchy shared by all modules."""


class MKDissError(Exception):
    """Base class for package errors."""


class ConfigurationError(MKDissError, ValueError):
    """Invalid physical configuration or config file."""


class ParameterError(MKDissError, ValueError):
    """A numeric argument is outside its admissible range."""


class DomainError(ParameterError):
    """A weight or formula was evaluated outside its positivity domain."""


class ScaleTooSmallError(ParameterError):
    """A cube or ball is smaller than the grid can represent."""


class InstabilityError(MKDissError, ArithmeticError):
    """Time stepping produced non-finite values.

    ``timeline`` holds every snapshot recorded before the failure.
    """

    def __init__(self, message, dt=None, time=None, timeline=None):
        super().__init__(message)
        self.dt = dt
        self.time = time
        self.timeline = timeline


class ConvergenceError(MKDissError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ReportingError(MKDissError):
    """A report could not be assembled from the available data."""
