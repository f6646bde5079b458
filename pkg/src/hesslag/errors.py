"""Exception hierarchy shared by every layer of the engine."""

from __future__ import annotations


class HessLagError(Exception):
    """Base class for all engine errors."""


class ExprSyntaxError(HessLagError):
    def __init__(self, message: str, position: int, expected: str | None = None):
        self.position = position
        self.expected = expected
        detail = f"{message} at offset {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class UnknownVariableError(HessLagError):
    def __init__(self, name: str, position: int | None = None):
        self.name = name
        self.position = position
        where = f" at offset {position}" if position is not None else ""
        super().__init__(f"unknown variable {name!r}{where}")


class UnknownFunctionError(HessLagError):
    def __init__(self, name: str, position: int | None = None):
        self.name = name
        self.position = position
        where = f" at offset {position}" if position is not None else ""
        super().__init__(f"unknown function {name!r}{where}")


class UnboundVariableError(HessLagError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name!r} is not bound")


class DomainError(HessLagError):
    """A subexpression was evaluated outside its domain."""

    def __init__(self, reason: str, subexpression: str):
        self.reason = reason
        self.subexpression = subexpression
        super().__init__(f"{reason} in {subexpression!r}")


class SingularMetricError(HessLagError):
    """The metric (Hessian or fiber Hessian) is degenerate at a point."""

    def __init__(self, det: float, point=None):
        self.det = det
        self.point = None if point is None else [float(v) for v in point]
        where = f" at point {self.point}" if self.point is not None else ""
        super().__init__(f"singular metric (det={det:.6g}){where}")


class NotPositiveDefiniteError(HessLagError):
    """Generalized eigenproblem requested with an indefinite reference form."""


class SymmetryError(HessLagError):
    """A tensor lacks the pair symmetries required by the operation."""


class NullConeError(HessLagError):
    """The cone has vanishing norm, so its conical curvature is undefined."""


class ValidationError(HessLagError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"invalid scenario field {field!r}: {reason}")
