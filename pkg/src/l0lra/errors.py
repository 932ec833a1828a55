"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An input violates a documented precondition of an operation."""


class CapExceededError(PreconditionError):
    """A sampling procedure hit its draw cap before its stopping condition.

    Usually this means the quantity being estimated is zero or very close
    to it.
    """


class EnumerationLimitError(PreconditionError):
    """An exhaustive routine was asked to enumerate beyond its size bound."""


class MatrixFormatError(OSError):
    """A matrix file could not be parsed."""
