"""Exception types and warnings shared across the package."""


class RubricnetError(Exception):
    """Base class for all errors raised by this package."""


class EmptyPartError(RubricnetError):
    """A hand part contains no notes where at least one is required."""


class InvalidTempoError(RubricnetError):
    """A piece carries a tempo marking that is not a positive number."""


class ScoreParseError(RubricnetError):
    """An input document could not be turned into a piece.

    ``field`` names the offending element or key when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class UnsupportedLayoutError(ScoreParseError):
    """The score does not reduce to exactly two hand streams."""


class CorpusLoadError(RubricnetError):
    """A corpus directory or labels file is missing or inconsistent."""


class CheckpointError(RubricnetError):
    """A model checkpoint is malformed or incompatible."""


class FitError(RubricnetError):
    """Training was invoked with unusable data."""


class NumericError(RubricnetError):
    """A numeric computation received or produced non-finite values."""


class AnalysisError(RubricnetError):
    """A statistical analysis cannot be computed from the given data."""


class ContributionError(AnalysisError):
    """Grade-relative contributions lack the reference grade."""


class DegeneratePartWarning(UserWarning):
    """A descriptor received fewer events than its definition expects."""
