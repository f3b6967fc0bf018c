"""
Exception hierarchy shared by every layer.

Divergences and bound right-hand sides use +inf as an ordinary value; the
errors below are reserved for inputs that cannot be computed with at all.
"""
from typing import Any, Mapping


class LabError(Exception):
    """Root of all imitlab errors."""
    pass


class ShapeError(LabError, ValueError):
    """Raised when array dimensions of the inputs do not agree."""
    pass


class DistributionError(LabError, ValueError):
    """Raised when a probability table is outside tolerance or an index is out of range."""
    pass


class CapacityError(LabError, ValueError):
    """Raised when an exact enumeration would exceed its size cap."""
    pass


class NonFiniteGradientError(LabError, ArithmeticError):
    """Raised when a first-order learner produces a NaN or infinite gradient."""
    pass


class SolverError(LabError):
    """Raised when a linear program or linear system cannot be solved."""

    def __init__(
        self,
        message: str,
        iterations: int = 0,
        certificate: Mapping[str, Any] | None = None,
    ) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.certificate = dict(certificate or {})


class InfeasibleError(SolverError):
    """Raised when a linear program has no feasible point."""
    pass
