"""Waypoint-level evaluation: accuracy against a reference pose, precision
about the measurements' own mean, completeness over rounds, cumulative
precision curves with a normalized area score, and distribution summaries.

All per-waypoint statistics use unsquared deviations (mean of norms, not
norm of means), so precision is a mean dispersion, not a standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FrameMismatchError
from .geometry import Pose2, angle_distance, circular_mean
from .task import AttainmentRecord, AttainmentTable, RobotProfile


@dataclass(frozen=True)
class WaypointAccuracy:
    """Mean deviation from the surveyed target pose, over rounds."""

    position_m: float
    orientation_rad: float


@dataclass(frozen=True)
class WaypointPrecision:
    """Mean dispersion about the measurements' own mean pose, over rounds."""

    position_m: float
    orientation_rad: float


@dataclass(frozen=True)
class CompletenessResult:
    """Fraction of waypoints reached in every scored round."""

    ratio: float
    indicators: Dict[Tuple[str, str], int]

    @property
    def completed(self) -> int:
        return sum(self.indicators.values())

    @property
    def total(self) -> int:
        return len(self.indicators)


@dataclass(frozen=True)
class CumulativeCurve:
    """Fraction of all waypoints whose value falls strictly below each
    threshold.  Failed waypoints contribute no value, so the curve
    plateaus at the completeness ratio."""

    thresholds: Tuple[float, ...]
    fraction_below: Tuple[float, ...]
    x_max: float


@dataclass(frozen=True)
class DistributionSummary:
    mean: float
    q1: float
    median: float
    q3: float
    min: float
    max: float
    count: int


PoseLike = Union[Pose2, AttainmentRecord]


def _poses_and_frame(records: Sequence[PoseLike], what: str):
    """Unpack records to poses, enforcing a single frame when records
    carry one."""
    if len(records) == 0:
        raise ValueError(f"{what}: no records")
    poses = []
    frame = None
    for r in records:
        if isinstance(r, AttainmentRecord):
            if frame is None:
                frame = r.frame_id
            elif r.frame_id != frame:
                raise FrameMismatchError(
                    f"{what}: records mix frames {frame!r} and {r.frame_id!r}"
                )
            poses.append(r.measured_pose)
        else:
            poses.append(r)
    return poses, frame


def waypoint_accuracy(
    records: Sequence[PoseLike],
    reference: Pose2,
    reference_frame: Optional[str] = None,
) -> WaypointAccuracy:
    """Mean position error and mean wrap-aware heading error against a
    reference pose.

    ``reference_frame`` names the frame the reference is expressed in;
    records carrying a different frame raise :class:`FrameMismatchError`.
    """
    poses, frame = _poses_and_frame(records, "waypoint_accuracy")
    if reference_frame is not None and frame is not None and frame != reference_frame:
        raise FrameMismatchError(
            f"waypoint_accuracy: records in frame {frame!r} but reference in {reference_frame!r}"
        )
    pos_err = math.fsum(math.hypot(p.x - reference.x, p.y - reference.y) for p in poses)
    ang_err = math.fsum(angle_distance(p.theta, reference.theta) for p in poses)
    n = len(poses)
    return WaypointAccuracy(pos_err / n, ang_err / n)


def waypoint_precision(records: Sequence[PoseLike]) -> WaypointPrecision:
    """Mean dispersion about the mean: arithmetic mean for positions,
    circular mean for headings.

    A degenerate heading mean (near-zero resultant) raises
    :class:`~navbench.errors.DegenerateMeanError` rather than reporting a
    meaningless number.
    """
    poses, _ = _poses_and_frame(records, "waypoint_precision")
    n = len(poses)
    mx = math.fsum(p.x for p in poses) / n
    my = math.fsum(p.y for p in poses) / n
    mtheta = circular_mean(p.theta for p in poses)
    pos = math.fsum(math.hypot(p.x - mx, p.y - my) for p in poses) / n
    ang = math.fsum(angle_distance(p.theta, mtheta) for p in poses) / n
    return WaypointPrecision(pos, ang)


def completeness(table: AttainmentTable, rounds: Optional[int] = None) -> CompletenessResult:
    """Per-waypoint all-rounds indicators and their overall ratio.

    A waypoint counts as completed only if it holds a record for every
    scored round (priming excluded).  ``rounds`` defaults to the table's
    configured round count.
    """
    if rounds is None:
        rounds = table.rounds
    cells = table.waypoints()
    if not cells:
        raise ValueError("completeness: table has no waypoints")
    indicators = {cell: 1 if table.m_ki(*cell) == rounds else 0 for cell in cells}
    return CompletenessResult(sum(indicators.values()) / len(cells), indicators)


def to_task_units(value: float, profile: RobotProfile, kind: str) -> float:
    """Express a metric in robot-relative units.

    ``kind="position"`` divides meters by the robot diameter;
    ``kind="angle"`` divides radians by the field of view.
    """
    if kind == "position":
        return value / profile.diameter_m
    if kind == "angle":
        return value / profile.fov_rad
    raise ValueError(f"kind must be 'position' or 'angle', got {kind!r}")


def cumulative_curve(
    values: Iterable[float],
    total_waypoints: int,
    thresholds: Sequence[float],
) -> CumulativeCurve:
    """Fraction of all waypoints with a value strictly below each threshold.

    ``values`` holds one number per completed waypoint; ``total_waypoints``
    is the full waypoint count, completed or not.
    """
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise ValueError("cumulative_curve: thresholds must be non-empty")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("cumulative_curve: thresholds must be strictly ascending")
    values = np.sort(np.asarray(list(values), dtype=float))
    if not (isinstance(total_waypoints, (int, np.integer)) and total_waypoints >= 1):
        raise ValueError(f"cumulative_curve: total_waypoints must be >= 1, got {total_waypoints!r}")
    if len(values) > total_waypoints:
        raise ValueError(
            f"cumulative_curve: {len(values)} values exceed {total_waypoints} waypoints"
        )
    counts = np.searchsorted(values, thresholds, side="left")
    fractions = tuple(float(c) / total_waypoints for c in counts)
    return CumulativeCurve(tuple(thresholds), fractions, thresholds[-1])


def normalized_auc(curve: CumulativeCurve) -> float:
    """Area under the curve's staircase over [0, x_max], divided by x_max.

    The curve value at a threshold is held over the interval ending at that
    threshold (the underlying fraction-below function is left-continuous),
    so the score is exact whenever the thresholds include every point where
    the fraction changes.  Equals 1.0 iff the curve is 1.0 everywhere.
    """
    if not (curve.x_max > 0):
        raise ValueError(f"normalized_auc: x_max must be positive, got {curve.x_max!r}")
    area = 0.0
    prev_t = 0.0
    for t, f in zip(curve.thresholds, curve.fraction_below):
        area += f * (t - prev_t)
        prev_t = t
    return area / curve.x_max


def distribution_summary(values: Iterable[float]) -> DistributionSummary:
    """Mean, min, max and linearly interpolated quartiles."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("distribution_summary: no values")
    q1, median, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return DistributionSummary(
        mean=float(arr.mean()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        min=float(arr.min()),
        max=float(arr.max()),
        count=int(arr.size),
    )
