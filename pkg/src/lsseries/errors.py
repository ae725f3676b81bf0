"""Exception hierarchy.

Each exception carries an ``exit_code`` used by the command-line layer:
2 config error, 3 data error, 4 numerical failure, 5 study guard violation.
"""

from __future__ import annotations


class SeriesError(Exception):
    exit_code = 4


class ConfigError(SeriesError):
    exit_code = 2


class InvalidConfig(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


class UnknownStudy(ConfigError):
    pass


class DataError(SeriesError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class OutOfDomain(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NumericalError(SeriesError):
    exit_code = 4


class NotPositiveDefinite(NumericalError):
    def __init__(self, message: str, pivot: float | None = None, index: int | None = None):
        super().__init__(message)
        self.pivot = pivot
        self.index = index


class NotPSD(NumericalError):
    pass


class SingularDesign(NumericalError):
    """Empirical Gram matrix failed Cholesky; eigenvalues not bounded away from zero."""

    def __init__(self, message: str, pivot: float | None = None):
        super().__init__(message)
        self.pivot = pivot


class NonPositiveWeight(DataError):
    pass


class NotDifferentiable(NumericalError):
    pass


class ZeroLoading(NumericalError):
    pass


class DegenerateVariance(NumericalError):
    pass


class BootstrapFailure(NumericalError):
    pass


class DimensionTooLarge(ConfigError):
    pass


class GuardViolation(SeriesError):
    exit_code = 5


class InsufficientDraws(GuardViolation):
    pass


class InsufficientReps(GuardViolation):
    pass


class TooManyFailures(GuardViolation):
    pass


class NotSymmetric(NumericalError):
    pass
