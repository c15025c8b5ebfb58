from __future__ import annotations
from typing import Any, Dict, Optional


class BusyqError(RuntimeError):
    """Base error. `code` is stable and machine-readable; `path` points at the offending field."""

    code = "BUSYQ_ERROR"
    exit_status = 2

    def __init__(self, message: str, *, code: Optional[str] = None, path: str = "") -> None:
        super().__init__(message)
        self.message = message
        if code:
            self.code = code
        self.path = path

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, "path": self.path}


# ----- validation (exit 1) -----
class ModelValidationError(BusyqError):
    code = "INVALID_MODEL"
    exit_status = 1


# ----- numerical (exit 2) -----
class NumericalError(BusyqError):
    code = "NUMERICAL_FAILURE"
    exit_status = 2


class IntegrationError(NumericalError):
    code = "INTEGRATION_FAILURE"


class InversionError(NumericalError):
    code = "INVERSION_FAILURE"


class NonTailError(NumericalError):
    code = "NON_TAIL"


# ----- warnings -----
class CancellationWarning(UserWarning):
    """Alternating sums lost more significant digits than the monitor allows."""


class PoleWarning(UserWarning):
    """A transform denominator came close to underflow."""
