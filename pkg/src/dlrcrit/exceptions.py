"""Exception hierarchy shared by the solvers."""


class CriticalityError(Exception):
    """Base class for all errors raised by dlrcrit."""


class InvalidInputError(CriticalityError, ValueError):
    """Malformed or non-finite input, or a violated precondition."""


class ValidationError(InvalidInputError):
    """A domain invariant (material, library, schema) does not hold."""

    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant


class InconsistentGeometryError(InvalidInputError):
    pass


class SingularOperatorError(CriticalityError, ArithmeticError):
    """A stacked Sylvester operator is numerically singular.

    ``context`` names the solve that failed ("K-step", "L-step", "S-step",
    "full step", ...).
    """

    def __init__(self, message, context=None):
        if context:
            message = f"[{context}] {message}"
        super().__init__(message)
        self.context = context


class ResourceLimitError(CriticalityError, MemoryError):
    pass


class NonConvergenceError(CriticalityError, RuntimeError):
    """An iteration hit its budget. The partial trace is attached."""

    def __init__(self, message, trace=None, result=None):
        super().__init__(message)
        self.trace = trace
        self.result = result


class StationaryPointError(NonConvergenceError):
    """Optimization stopped because the step size fell below ``h_min``."""


class DataUnavailableError(CriticalityError, FileNotFoundError):
    pass
