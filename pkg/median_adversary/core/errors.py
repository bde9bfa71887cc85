from typing import Any, Dict, Optional


class MedianAdversaryError(Exception):
    """Base class for every error the package surfaces to the CLI"""

    exit_code = 4

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self._details = details

    def details(self) -> Dict[str, Any]:
        return dict(self._details)

    def to_diagnostic(self) -> Dict[str, Any]:
        """JSON-ready diagnostic record"""
        return {
            "error": type(self).__name__,
            "message": self.message,
            **self.details(),
        }


class InvalidInput(MedianAdversaryError, ValueError):
    exit_code = 2


# Query bookkeeping
class SelfPair(MedianAdversaryError, ValueError):
    def __init__(self, x: int):
        super().__init__(f"Query for d({x},{x}) is forbidden", x=x)


class RepeatedQuery(MedianAdversaryError, ValueError):
    def __init__(self, lo: int, hi: int):
        super().__init__(f"Pair ({lo},{hi}) was already queried", lo=lo, hi=hi)


class PhaseError(MedianAdversaryError):
    pass


class BudgetExceeded(MedianAdversaryError):
    def __init__(self, budget: int):
        super().__init__(f"Query budget of {budget} distinct queries exhausted", budget=budget)


# Invalid parameters
class BadDelta(InvalidInput):
    pass


class BadSetSize(InvalidInput):
    pass


class DegenerateOptimum(InvalidInput):
    pass


class MetricTooLarge(InvalidInput):
    pass


class UnknownAlgorithm(InvalidInput):
    pass


class NonDeterministicAlgorithm(InvalidInput):
    pass


class MetricParseError(InvalidInput):
    def __init__(self, message: str, line: Optional[int] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}", line=line)


class RangeError(InvalidInput):
    pass


class Disconnected(InvalidInput):
    pass


# Adversary premise
class EmptySafeSet(MedianAdversaryError):
    exit_code = 3


# Internal invariants: these signal implementation bugs
class InvariantViolation(MedianAdversaryError):
    exit_code = 4


class BoundViolation(InvariantViolation):
    def __init__(self, message: str, state: Dict[str, Any]):
        super().__init__(message, state=state)
        self.state = state


class CaseExclusivityError(InvariantViolation):
    pass


class ReplayMismatch(InvariantViolation):
    pass
