"""Exception hierarchy shared by every module.

Each error carries enough structure to be rendered as a JSON object by the
command-line tool (see :meth:`CliffordError.to_dict`).
"""

from __future__ import annotations

from typing import Any


class CliffordError(Exception):
    """Base class. ``stage`` is filled in by pipeline drivers."""

    code = "clifford_error"

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details
        self.stage: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"error": self.code, "message": self.message}
        if self.stage is not None:
            out["stage"] = self.stage
        for key, value in self.details.items():
            out[key] = _jsonable(value)
        return out


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


class SignatureMismatch(CliffordError, ValueError):
    code = "signature_mismatch"


class GradeOutOfRange(CliffordError, ValueError):
    code = "grade_out_of_range"


class SingularElement(CliffordError, ArithmeticError):
    code = "singular_element"


class NoCandidateFound(CliffordError):
    code = "no_candidate_found"


class VerificationFailed(CliffordError):
    code = "verification_failed"


class NotAdmissible(CliffordError):
    code = "not_admissible"


class CaseMismatch(CliffordError):
    code = "case_mismatch"


class OrthogonalityViolated(CliffordError, ValueError):
    code = "orthogonality_violated"


class AxisOutOfRange(CliffordError, IndexError):
    code = "axis_out_of_range"


class ShapeMismatch(CliffordError, ValueError):
    code = "shape_mismatch"


class DegenerateHBasis(CliffordError, ArithmeticError):
    code = "degenerate_h_basis"


class NotGrade1(CliffordError, ValueError):
    code = "not_grade1"


class SingularityDetected(CliffordError, ArithmeticError):
    code = "singularity_detected"


class NotClosed(CliffordError):
    code = "not_closed"


class PathDependent(CliffordError):
    code = "path_dependent"


class ExprSyntaxError(CliffordError, SyntaxError):
    """Parse failure at byte ``offset`` of the source text."""

    code = "syntax_error"

    def __init__(self, message: str, offset: int, expected: str) -> None:
        CliffordError.__init__(self, message, offset=offset, expected=expected)
        self.offset = offset
        self.expected = expected

    def __str__(self) -> str:
        return f"{self.message} at offset {self.offset} (expected {self.expected})"


class ExprEvalError(CliffordError, ArithmeticError):
    code = "eval_error"
