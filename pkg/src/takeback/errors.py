"""Exception types shared across the package.

Instance-file problems are collected into :class:`InstanceValidationError`
so a single load reports every defect at once; solver failures are raised
individually.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Issue:
    """One validation defect: a machine-readable code plus human context."""

    code: str
    message: str

    def as_dict(self) -> dict:
        return {"code": self.code, "message": self.message}


# Codes used by the instance loader / validator.
MISSING_FILE = "MissingFile"
MISSING_COLUMN = "MissingColumn"
UNKNOWN_ID = "UnknownId"
NEGATIVE_VALUE = "NegativeValue"
UNIT_MISMATCH = "UnitMismatch"
DUPLICATE_ID = "DuplicateId"
MISSING_VALUE = "MissingValue"
INVALID_VALUE = "InvalidValue"


class TakebackError(Exception):
    """Base class for all package errors."""


class InstanceValidationError(TakebackError):
    """Raised when instance files fail schema or consistency checks.

    Carries the full list of issues found, not just the first one.
    """

    def __init__(self, issues: list[Issue]):
        self.issues = list(issues)
        lines = "; ".join(f"{i.code}: {i.message}" for i in self.issues)
        super().__init__(f"{len(self.issues)} validation issue(s): {lines}")


class SolverError(TakebackError):
    """Base class for optimization failures."""


class NumericalBreakdown(SolverError):
    """The simplex engine could not continue (tiny pivots, singular basis
    or an iteration budget blown despite anti-cycling recovery)."""


class InfeasibleProgram(SolverError):
    """A mixed-integer program has no feasible point."""


class NodeLimitExceeded(SolverError):
    """Branch-and-bound hit its node cap before proving optimality."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class DualUnavailable(SolverError):
    """Cut construction was asked to run on a non-optimal stage-two solve."""


class TooManySites(SolverError):
    """The brute-force reference solver refuses instances beyond its
    enumeration guard."""
