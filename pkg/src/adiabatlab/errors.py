"""
Exception hierarchy shared by the library and the CLI.

Every error carries the exit code the CLI returns when it escapes a command.
"""

from typing import Optional


class LabError(Exception):
    """Base class for all adiabatlab errors."""

    exit_code = 1

    def __init__(self, message: str, pointer: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.pointer = pointer

    def to_dict(self) -> dict:
        """Machine-readable form written to stderr by the CLI."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "pointer": self.pointer,
            "exit_code": self.exit_code,
        }


class ConfigError(LabError):
    """Invalid settings, model JSON or command-line arguments."""

    exit_code = 3


class ResourceLimit(LabError):
    """A box or Fock space exceeds the configured budget."""

    exit_code = 3


class BoundViolation(LabError):
    """A proven inequality or acceptance threshold failed numerically."""

    exit_code = 2


class GapError(BoundViolation):
    """The standing gap assumption does not hold."""


class NoGap(GapError):
    """No spectral cluster satisfies the declared gap condition."""


class MultiplicityExceeded(GapError):
    """The detected patch is larger than kappa_max."""


class GapContinuityError(GapError):
    """The patch multiplicity jumps along a time or box grid."""


class ParityError(LabError, ValueError):
    """An operation received an operator of the wrong parity."""


class TermValidationError(LabError, ValueError):
    """An interaction term is not Hermitian, even and number-conserving."""


class ShapeMismatch(LabError, ValueError):
    """Operands live on different spaces or boxes."""


class ToleranceError(LabError):
    """A numerical tolerance could not be met."""


class PropagationError(LabError):
    """The time integrator could not advance."""


class BudgetExceeded(LabError):
    """The wall-clock budget of a run was used up."""

    exit_code = 4


class NotHermitian(LabError, ValueError):
    """An operation that needs a self-adjoint operator got something else."""


class NotPatchSupported(LabError, ValueError):
    """An initial state is not supported in the gapped patch."""
