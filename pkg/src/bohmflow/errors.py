"""Exception hierarchy shared by all modules."""


class BohmflowError(Exception):
    """Base class for library errors."""


class ValidationError(BohmflowError, ValueError):
    """Input does not satisfy a type invariant."""


class ParameterError(ValidationError):
    """Invalid physical parameters (normalisation, ranges)."""


class UnsupportedModeError(ValidationError):
    """Fock level outside the supported {0, 1} truncation."""


class UnsupportedTemperatureError(BohmflowError):
    """The analytic damping channel only covers a zero-temperature bath."""


class PositivityError(BohmflowError):
    """A probability density came out negative beyond roundoff."""


class NodalSingularityError(BohmflowError):
    """The velocity field was evaluated where the density vanishes."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DomainError(BohmflowError):
    """Root finding requested outside the domain where a root exists."""


class SamplingError(BohmflowError):
    """Rejection sampling acceptance rate too low."""


class DiagnosticFailure(BohmflowError):
    """A diagnostic could not be evaluated reliably (e.g. too many truncated trajectories)."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}


class RateSingularityError(BohmflowError):
    """Positive current leaving a site of zero probability."""


class StepSizeError(BohmflowError):
    """Jump probability per step reached 1 at some site."""

    def __init__(self, message, site=None):
        super().__init__(message)
        self.site = site
