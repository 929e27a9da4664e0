"""
Error types for the Induced Ramsey Workbench
Each error knows its CLI exit code and HTTP status
"""

from typing import Any, Dict, Iterable, List, Optional, Sequence


class RamseyError(Exception):
    """Base class for all workbench errors"""

    exit_code = 2
    http_status = 400
    kind = "error"

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.kind, "message": self.message, "detail": self.detail}


class InvalidInputError(RamseyError):
    """Malformed input or violated precondition"""

    exit_code = 2
    http_status = 422
    kind = "invalid_input"


class BudgetExceededError(RamseyError):
    """An enumeration would exceed its cap"""

    exit_code = 2
    http_status = 413
    kind = "budget_exceeded"

    def __init__(self, what: str, required: float, budget: float):
        super().__init__(
            f"{what}: {required:.6g} steps required, budget is {budget:.6g}",
            {"what": what, "required": float(required), "budget": float(budget)},
        )
        self.required = required
        self.budget = budget


class SearchExhaustedError(RamseyError):
    """Attempts, resamples or search space ran out without success"""

    exit_code = 2
    http_status = 409
    kind = "search_exhausted"


class CleaningError(SearchExhaustedError):
    """A cleaning stage could not produce its trimmed parts"""

    kind = "cleaning_failed"


class InvariantViolation(RamseyError):
    """A bug guard fired: a certificate or verification that must hold did not"""

    exit_code = 1
    http_status = 500
    kind = "invariant_violation"


def json_pointer(loc: Sequence[Any]) -> str:
    """JSON pointer (/gadget/p) for a pydantic error location"""
    tokens = (str(part).replace("~", "~0").replace("/", "~1") for part in loc)
    return "/" + "/".join(tokens) if loc else ""


def schema_errors(
    errors: Iterable[Dict[str, Any]], skip: int = 0
) -> List[Dict[str, str]]:
    """
    Flatten pydantic validation errors to pointer and message pairs

    Args:
        errors: ValidationError.errors() or RequestValidationError.errors()
        skip: Leading location parts to drop, e.g. 1 for FastAPI's "body"
    """
    return [
        {
            "path": json_pointer(tuple(e.get("loc", ()))[skip:]),
            "message": e.get("msg", ""),
        }
        for e in errors
    ]
