"""Exception and warning types shared across the package."""


class MchError(Exception):
    """Base class for all errors raised by mchwave."""


class ParameterError(MchError, ValueError):
    """Wave parameters outside the admissible window."""


class DomainError(MchError, ValueError):
    """Input field or argument outside the domain of an operation."""


class IntegrationError(MchError, RuntimeError):
    """Profile integration failed or did not converge."""


class SolverError(MchError, RuntimeError):
    """A linear-algebra solve did not meet its accuracy contract."""


class AmbiguityError(MchError, ArithmeticError):
    """An inverse derivative was requested of a field without zero mean."""


class ParityError(MchError, AssertionError):
    """A field expected to be even is not even to tolerance."""


class PositivityError(MchError, RuntimeError):
    """The momentum field lost positivity during time evolution."""

    def __init__(self, message, t=None, min_m=None):
        super().__init__(message)
        self.t = t
        self.min_m = min_m


class BlowUpError(MchError, FloatingPointError):
    """Non-finite values appeared during time evolution."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ResolutionWarning(UserWarning):
    """Grid spacing too coarse for the operator being discretized."""


class ConditioningWarning(UserWarning):
    """A linear system is close to singular."""
