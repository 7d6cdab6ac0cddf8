"""Exception hierarchy for brwspectrum."""


class BrwError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(BrwError, ValueError):
    """A precondition on user-supplied parameters is violated."""


class DegenerateKernelError(BrwError):
    """Kernel construction produced an empty or unusable support."""


class QuadratureFailureError(BrwError):
    """Quadrature did not converge within the refinement cap.

    Carries the best available estimate and its error so callers can decide
    whether to degrade gracefully.
    """

    def __init__(self, message, best_estimate=None, estimated_error=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.estimated_error = estimated_error


class DivergentGreenError(BrwError):
    """A lambda = 0 Green value was requested in a divergent regime."""


class SymbolDegeneracyError(BrwError):
    """The symbol lower bound c1 came out nonpositive (invalid kernel)."""


class SolverOverflowError(BrwError):
    """No root bracket found below the lambda overflow guard."""


class NumericalDegeneracyError(BrwError):
    """Perron vector lost strict positivity (lambda too close to 0)."""


class InternalConsistencyFailure(BrwError):
    """Root grouping violated a structural guarantee (tolerance misconfig)."""


class DegenerateInputError(BrwError):
    """An input matrix is degenerate for the requested bound (M == m)."""


class BoxTooLargeError(BrwError):
    """Truncated-operator box exceeds the memory guard."""


class SeriesTooLongError(BrwError):
    """Uniformization series length guard (t * Lambda) exceeded."""


class EstimationImpossibleError(BrwError):
    """Growth-rate fit has no usable data in the window."""


class ConfigError(BrwError):
    """Experiment configuration file is malformed or inconsistent."""
