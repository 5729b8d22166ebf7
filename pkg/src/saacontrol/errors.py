"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class CoefficientError(ValueError):
    """A diffusion coefficient is not strictly positive."""


class AdmissibilityError(ValueError):
    """A control violates the admissibility requirements of a PDE model."""


class UnsupportedDimension(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


class InvariantViolation(RuntimeError):
    pass


class SolverFailure(RuntimeError):
    """A linear solve did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ModelInconsistency(RuntimeError):
    pass


class StagnationError(RuntimeError):
    """The line search found no decrease; the partial trace is attached."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
