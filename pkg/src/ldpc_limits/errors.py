"""Exception types shared across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """An argument is outside its documented range."""


class DomainError(ValueError):
    """The requested quantity is undefined for these parameters."""


class BudgetExceeded(RuntimeError):
    """An exhaustive computation would exceed its work budget."""


class NumericError(ArithmeticError):
    """A numeric procedure failed to bracket or converge."""


class NonMonotoneError(RuntimeError):
    """A predicate assumed monotone in its argument was not."""


class MonotonicityError(ValueError):
    """A function on {0,1}^n is not monotone.

    ``pair`` holds the offending ``(x, y)`` with ``x <= y`` as bit masks.
    """

    def __init__(self, message: str, pair: tuple[int, int]):
        super().__init__(message)
        self.pair = pair
