"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto exit codes: usage problems exit 2, data problems
exit 3, numerical failures exit 4 and I/O failures exit 5.
"""


class LdarError(Exception):
    """Base class for all library errors."""


class DataError(LdarError):
    """Bad input data (CSV parsing, empty series, missing column).

    ``code`` distinguishes the failure kind: "empty", "parse", "column"
    or "file".
    """

    def __init__(self, message, code="data"):
        super().__init__(message)
        self.code = code


class NumericalError(LdarError):
    """Base class for numerical failures (exit code 4)."""


class NonConvergenceError(NumericalError):
    """Optimizer failed on every restart.

    Carries the best point seen so far (a FitResult or None) in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularMatrixError(NumericalError):
    """A matrix that must be inverted is numerically singular."""


class DegenerateSampleError(NumericalError):
    """A sample has no spread where positive spread is required."""
