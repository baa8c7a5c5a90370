"""Exception hierarchy shared by all reba modules."""

from __future__ import annotations


class RebaError(Exception):
    """Base class for errors raised by this package."""


class FormatError(RebaError):
    """A byte stream does not conform to the bundle or matrix file format."""


class ValidationError(RebaError):
    """An input violates a documented invariant or precondition.

    When raised from bundle validation, ``violations`` carries every
    :class:`~reba.bundle.Violation` found, first violation first.
    """

    def __init__(self, message: str, violations: tuple = ()):
        super().__init__(message)
        self.violations = tuple(violations)


class NumericError(RebaError):
    """A numeric operation received non-finite or otherwise unusable input."""


class DegenerateVectorError(NumericError):
    """A zero-norm vector reached an operation that needs a direction."""


class DegenerateStatisticsError(NumericError):
    """A statistic is undefined for the given sample (e.g. zero variance)."""
