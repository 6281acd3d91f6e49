"""Exception types shared across the toolkit."""


class NavBenchError(Exception):
    """Base class for all toolkit-specific errors."""


class DegenerateMeanError(NavBenchError):
    """Circular or rotational mean is undefined (near-zero resultant)."""


class DegenerateProjectionError(NavBenchError):
    """Yaw extraction is ill-posed (body x-axis nearly vertical)."""


class AlignmentError(NavBenchError):
    """Rigid alignment failed: mismatched lengths or degenerate geometry."""


class FrameMismatchError(NavBenchError):
    """Poses expected in one coordinate frame arrived in several."""


class DuplicateRecordError(NavBenchError):
    """A (waypoint, round) slot already holds a record."""


class ScenarioError(NavBenchError):
    """Scenario document violates the schema or its invariants."""


class DetectionLogError(NavBenchError):
    """Detection log contains a malformed or invalid row."""


class InputFormatError(NavBenchError):
    """Auxiliary input file (schedule, station map) is malformed."""


class TrajectoryFormatError(NavBenchError):
    """Trajectory file is malformed, misordered, or has unknown layout."""


class AssociationError(NavBenchError):
    """Timestamp association failed (no overlapping frames or windows)."""


class AssociationAmbiguityError(AssociationError):
    """Timestamp association is ambiguous (conflicting candidate matches)."""
