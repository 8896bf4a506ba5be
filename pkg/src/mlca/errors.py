"""Exception hierarchy.

User-facing input problems derive from ``DataError`` (a ``ValueError``);
numerical trouble during estimation derives from ``EstimationError``.
The CLI maps the first family to exit code 1 and the second to 2.
"""


class MlcaError(Exception):
    pass


class DataError(MlcaError, ValueError):
    pass


class MissingColumnError(DataError, KeyError):
    def __init__(self, column):
        super().__init__(f"column {column!r} not found in input")
        self.column = column

    def __str__(self):
        return self.args[0]


class DegenerateItemError(DataError):
    pass


class DegenerateCovariateError(DataError):
    pass


class EmptyStructuralDataError(DataError):
    pass


class InfeasibleClusteringError(DataError):
    pass


class EstimationError(MlcaError, RuntimeError):
    pass


class ConvergenceError(EstimationError):
    pass


class MonotonicityError(EstimationError):
    """Log-likelihood decreased during EM: an implementation bug, never data."""
