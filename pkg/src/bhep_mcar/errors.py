"""Exception hierarchy.

Every error raised on bad input derives from :class:`BhepError`, which is a
``ValueError`` so callers that only care about "bad data" can catch that.
"""


class BhepError(ValueError):
    """Base class for all package errors."""


class NotPositiveDefinite(BhepError):
    """A matrix that must be symmetric positive definite is not."""


class SingularCovariance(NotPositiveDefinite):
    """The covariance estimate used for standardization is singular."""


class TooFewRows(BhepError):
    """Not enough rows to evaluate the statistic (need ``n >= d + 2``)."""


class TooFewCompleteCases(TooFewRows):
    """Not enough fully observed rows."""


class EmptyColumn(BhepError):
    """A column has no observed entries."""


class NoDonor(BhepError):
    """kNN imputation found no donor row for a missing entry."""


class UnsupportedDimension(BhepError):
    """Requested dimension is outside the supported range."""


class DegenerateBootstrap(BhepError):
    """Too many bootstrap cycles failed their preconditions."""


class ParseError(BhepError):
    """Malformed CSV input."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class RaggedRows(ParseError):
    """CSV rows have differing numbers of fields."""


class InvalidConfig(BhepError):
    """An experiment configuration is malformed."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class AllReplicatesFailed(BhepError):
    """Every Monte Carlo replicate of a cell failed."""


class IncompleteGrid(BhepError):
    """Results do not cover the axes a figure needs."""

    def __init__(self, message: str, missing: list | None = None):
        self.missing = list(missing or [])
        super().__init__(message)
