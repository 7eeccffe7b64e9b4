"""
Exception hierarchy for bratteli-spectra.

Every error carries the process exit code the CLI maps it to.
"""

from typing import Any, Dict, List, Optional


class BratteliSpectraError(Exception):
    """Base class for all library errors"""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None,
                 violations: Optional[List[str]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}
        self.violations = violations or [message]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": type(self).__name__,
            "message": self.message,
            "details": self.details,
            "violations": self.violations,
        }


# exit code 2
class ValidationError(BratteliSpectraError):
    exit_code = 2


class GraphSpecError(ValidationError):
    pass


class NonPrimitive(ValidationError):
    pass


class TauInvalid(ValidationError):
    pass


class HorizontalInvalid(ValidationError):
    pass


class RhoOutOfRange(ValidationError):
    pass


class PathInvalid(ValidationError):
    pass


class DepthExceeded(ValidationError):
    pass


class WrongGraph(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class ParameterMismatch(ValidationError):
    pass


class BothResiduesZero(ValidationError):
    pass


class AtPole(ValidationError):
    pass


class DivergesAt(ValidationError):
    pass


# exit code 3
class DomainError(BratteliSpectraError):
    exit_code = 3


class NotPisot(DomainError):
    pass


class IrrationalityViolation(NotPisot):
    """Raised when the dilation factor is rational"""


# exit code 4
class StructuralError(BratteliSpectraError):
    exit_code = 4


class DisconnectedH(StructuralError):
    pass


class Unreachable(StructuralError):
    pass


class NoMeeting(StructuralError):
    pass


# exit code 5
class NumericError(BratteliSpectraError):
    exit_code = 5


class InsufficientDecay(NumericError):
    pass


class ToleranceFailure(NumericError):
    pass


class NotDiagonalizable(NumericError):
    pass


class DivisionByZero(BratteliSpectraError, ZeroDivisionError):
    """Inverse of the zero element of a number field"""

    exit_code = 2
