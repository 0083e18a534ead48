"""Exception types raised across the navigation stack."""


class WavenavError(Exception):
    """Base class for all package errors."""


class MapFormatError(WavenavError):
    pass


class OutOfBounds(WavenavError):
    """A world point or cell lies outside the grid."""


class SourceBlocked(WavenavError):
    pass


class SourceOutOfBounds(WavenavError):
    pass


class NoPath(WavenavError):
    pass


class StartBlocked(WavenavError):
    pass


class GoalBlocked(WavenavError):
    pass


class NonAdjacentCells(WavenavError):
    pass


class EmptyScan(WavenavError):
    pass


class PoseOutOfBounds(WavenavError):
    pass


class StartOutOfBounds(WavenavError):
    pass


class GoalOutOfBounds(WavenavError):
    pass


class TickAfterStop(WavenavError):
    pass


class SchemaError(WavenavError):
    """Scenario document does not match the schema; ``path`` names the key."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class MapMismatch(WavenavError):
    pass
