"""Exception types shared across the package."""


class SMPSError(Exception):
    """Base class for all package errors."""


class DimensionError(SMPSError, ValueError):
    """Operators or vectors with incompatible shapes."""


class ValidationError(SMPSError, ValueError):
    """An input violates a documented model constraint."""


class NumericalValidityError(SMPSError, ArithmeticError):
    """A computed quantity left its admissible range beyond rounding error."""
