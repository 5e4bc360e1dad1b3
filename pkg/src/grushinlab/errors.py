"""Shared exception types."""


class ParameterError(ValueError):
    """A parameter violates its admissibility condition."""


class DomainError(ValueError):
    """Evaluation requested outside the function's domain."""


class CapacityError(ValueError):
    """Requested size exceeds the desk-scale capacity guard."""


class NumericalError(RuntimeError):
    """A numerical routine failed (singular solve, non-convergence)."""


class ConvergenceError(NumericalError):
    """Iteration cap reached with residual above tolerance."""
