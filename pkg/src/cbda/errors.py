"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class CBDAError(ValueError):
    """Base class for every error raised by this package."""


class ScheduleError(CBDAError):
    """AL iteration index or budget schedule is out of range."""


class ClassIndexError(CBDAError):
    """A class id is outside ``{0, ..., C-1}`` or C is too small."""


class ShapeError(CBDAError):
    """Arrays that must agree in shape do not."""


class BudgetError(CBDAError):
    """A requested budget cannot be honoured."""


class ConsistencyError(CBDAError):
    """Class statistics disagree with the active label store."""


class DuplicateSelectionError(CBDAError):
    """A pixel was selected that is already part of the active label."""


class EmptySelectionError(CBDAError):
    """A metric was requested for an empty label set."""


class ConfigError(CBDAError):
    """A scenario or run configuration is invalid.

    ``field`` names the offending key (dotted path) when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
