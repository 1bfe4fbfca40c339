"""Exception hierarchy shared by all polyuta modules."""


class PolyUtaError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PolyUtaError, ValueError):
    """A performance lies outside its criterion scale."""


class ModeError(PolyUtaError):
    """An operation needs sorting thresholds (or ranking data) that are absent."""


class DataError(PolyUtaError, ValueError):
    """Malformed input files or inconsistent learning sets."""


class NotPsd(PolyUtaError, ValueError):
    """Cholesky met a negative pivot: the matrix is not positive semidefinite."""


class BuildError(PolyUtaError):
    """A conic problem was assembled with an unknown handle or after solving."""


class SpecError(PolyUtaError, ValueError):
    """An invalid fit specification (degree parity, continuity order, ...)."""


class ExtractionError(PolyUtaError):
    """A solved model failed its post-extraction checks."""


class MetricError(PolyUtaError, ValueError):
    """Two rankings do not cover the same alternatives."""
