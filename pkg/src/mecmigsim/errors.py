"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class EmptyGraphError(SimError):
    """Raised when an operation needs a road graph with at least one segment."""


class GraphValidationError(SimError):
    """Raised when a road graph violates a structural invariant
    (duplicate ids, endpoint mismatch, disconnected components, ...)."""


class OutOfRangeError(SimError):
    """Raised for coordinates or times outside their valid domain."""


class DegenerateBoundsError(SimError):
    """Raised when a bounding box has zero area."""


class InvalidClusterError(SimError):
    """Raised when regional clustering would produce single-station servers."""


class UnknownSegmentError(SimError):
    """Raised when a segment id is not present in a coverage map or graph."""


class ParseError(SimError):
    """Raised on malformed trace input; carries row/column diagnostics."""


class NonMonotonicTimeError(SimError):
    """Raised when trace timestamps do not strictly increase."""


class AlreadyActiveError(SimError):
    """Raised when begin() is called on a session that already started."""


class NotActiveError(SimError):
    """Raised when tick()/handoff() is called on a session that is not running."""


class NotDoneError(SimError):
    """Raised when a result is requested from an unfinished session."""


class InvalidDimsError(SimError):
    """Raised for non-positive grid dimensions."""


class ConfigError(SimError):
    """Raised for invalid scenario configuration; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class InternalInvariantError(SimError):
    """Raised when the engine detects a state that should be impossible."""
