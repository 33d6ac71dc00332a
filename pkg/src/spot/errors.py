"""Exception hierarchy and warning categories used across the package."""


class SpotError(Exception):
    """Base class for all errors raised by this package."""


class NotFound(SpotError):
    """A named facet, filter, dataset, or resource does not exist."""


class Conflict(SpotError):
    """An identifier is already in use."""


class KindMismatch(SpotError):
    """An operation was applied to a facet of an incompatible kind."""


class LimitExceeded(SpotError):
    """A partition/aggregate count or size limit was exceeded."""


class InvalidSpec(SpotError):
    """A partition or aggregate specification violates its invariants."""


class InvalidSelection(SpotError):
    """A selection violates its invariants (e.g. lo >= hi, empty label set)."""


class IncompatibleDatasets(SpotError):
    """Datasets cannot be combined (no shared facets, or kind conflicts)."""


class EncodingError(SpotError):
    """Input bytes are not valid UTF-8."""


class MalformedRow(SpotError):
    """A tabular row is wider than the header."""

    def __init__(self, message: str, row_index: int):
        super().__init__(message)
        self.row_index = row_index


class MalformedInput(SpotError):
    """Input is structurally not what the parser expects."""


class UnsupportedStructure(SpotError):
    """JSON records contain nested objects or arrays."""


class ParseError(SpotError):
    """A document failed to parse; `path` locates the offending element."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class ValidationError(SpotError):
    """A parsed document violates a semantic invariant."""


class UnsupportedVersion(SpotError):
    """A session document declares a format version this code cannot load."""


class SessionStateError(SpotError):
    """A session cannot be produced from the current view state."""


class BackendError(SpotError):
    """An execution backend failed (connection loss, bad binding, ...)."""


class EmptyFacetWarning(UserWarning):
    """A kind override left a facet with no parseable values at all."""


class IndexSkippedWarning(UserWarning):
    """An index could not be created (typically missing write permission)."""
