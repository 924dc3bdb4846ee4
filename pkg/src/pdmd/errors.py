"""Exception hierarchy shared by all pdmd modules."""


class PdmdError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(PdmdError, ValueError):
    """Input data violates a documented invariant."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class ArchiveFormatError(PdmdError):
    """Malformed header, unsupported version or unreadable manifest."""


class DimensionMismatchError(PdmdError, ValueError):
    """Array shapes disagree with each other or with a manifest."""


class ExtrapolationError(PdmdError, ValueError):
    """A hull-restricted regressor was queried outside its domain."""


class DegenerateGeometryError(PdmdError, ValueError):
    """Training points cannot support the requested regressor."""


class EmptySpectrumError(PdmdError):
    """Every DMD mode was discarded."""


class SolverDivergenceError(PdmdError):
    """The heat solver stayed unstable after all step-halving retries."""
