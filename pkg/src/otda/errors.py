"""Exception types raised by the solvers and loaders."""


class ConvergenceError(RuntimeError):
    """A solver hit its iteration cap before meeting its tolerance.

    The last iterate is kept on the exception so callers can still inspect
    or use it.
    """

    def __init__(self, message, plan=None, residual=None, gap=None, iteration=None):
        super().__init__(message)
        self.plan = plan
        self.residual = residual
        self.gap = gap
        self.iteration = iteration


class SinkhornUnderflowError(FloatingPointError):
    """The Gibbs kernel exp(-C/lambda) underflowed to an all-zero row or column."""


class DataFormatError(ValueError):
    """A feature file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
