"""Exception types raised by surfspin."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation exactly at a branch point of a field expression."""


class InputError(ValueError):
    """Malformed or insufficient input data."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericError(ArithmeticError):
    """A numerical procedure failed (NaN residuals, quadrature not converged)."""


class FitError(RuntimeError):
    """A fit could not be set up or the data contain no usable signal."""
