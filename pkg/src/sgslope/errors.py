"""Exception types raised across the package.

Everything derives from :class:`SgsError` so callers can catch one base.
Errors that signal bad user input also derive from ``ValueError``.
"""


class SgsError(Exception):
    """Base class for package errors."""


class DimensionMismatch(SgsError, ValueError):
    """Array shapes do not agree."""


class LengthMismatch(SgsError, ValueError):
    """A weight vector does not match the expected length."""


class GroupingError(SgsError, ValueError):
    """Group labels do not form a partition of the variables."""


class ConstantColumn(SgsError, ValueError):
    """A design column has zero variance and cannot be standardized."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"column {index} is constant (zero variance)")


class TooFewRows(SgsError, ValueError):
    """Not enough rows for the requested operation."""


class ParseError(SgsError, ValueError):
    """A delimited input file could not be parsed."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class WeightOrderViolation(SgsError, ValueError):
    """Penalty weights are not sorted non-increasing and non-negative."""


class InvalidFdrLevel(SgsError, ValueError):
    """A target false discovery rate is outside (0, 1)."""


class AlphaOutOfRange(SgsError, ValueError):
    """The convex mixing parameter is outside the range a formula supports."""


class RootBracketFailure(SgsError, ArithmeticError):
    """A monotone root could not be bracketed; indicates a CDF defect."""


class ZeroGradient(SgsError, ArithmeticError):
    """The loss gradient vanishes where a descent direction is required."""


class NumericalOverflow(SgsError, ArithmeticError):
    """A loss or gradient evaluation produced a non-finite value."""


class BacktrackingFailure(SgsError, ArithmeticError):
    """Step-size backtracking hit its iteration cap without majorizing."""


class DegenerateResidual(SgsError, ArithmeticError):
    """Residual degrees of freedom are exhausted during noise estimation."""


class FoldTooSmall(SgsError, ValueError):
    """A cross-validation fold leaves too little data to fit or score."""


class SupportCycle(SgsError, ArithmeticError):
    """Noise estimation oscillates between supports instead of settling."""

    def __init__(self, previous, current):
        self.previous = tuple(previous)
        self.current = tuple(current)
        super().__init__(
            f"support cycle between {self.previous} and {self.current}"
        )


class InconsistentScenario(SgsError, ValueError):
    """Simulation scenario fields contradict each other."""


class UsageError(SgsError, ValueError):
    """Command line arguments are invalid; message names the flag."""
