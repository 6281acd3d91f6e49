"""Real-world measurement ingestion.

Stations (environment-mounted cameras, or environment tags seen by the
robot) log timestamped detections of the robot's fiducial.  This module
clusters those detections into visits, associates each visit with the
(waypoint, round) whose nominal schedule window contains it, applies the
fully-visible success rule, and emits attainment records expressed in
each station's own local frame.  No cross-station calibration happens
anywhere: every waypoint is evaluated in its own frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import (
    AssociationAmbiguityError,
    DetectionLogError,
    FrameMismatchError,
    InputFormatError,
)
from .geometry import Pose2, Pose3, project_se3_to_se2
from .task import AttainmentRecord, AttainmentTable

DEFAULT_GAP_MAX_S = 10.0
DEFAULT_DWELL_MIN_S = 2.0
DEFAULT_SKEW_TOL_S = 1.0


@dataclass(frozen=True)
class Detection:
    """One sighting of the robot tag by one station, in that station's
    local frame."""

    timestamp: float
    station_id: str
    pose: Pose3
    fully_visible: bool

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValueError(f"non-finite timestamp {self.timestamp!r}")
        if not self.station_id:
            raise ValueError("station_id must be non-empty")


@dataclass(frozen=True)
class Visit:
    """A dwell at one station: a burst of detections close in time.

    The representative pose is the projected pose of the median-timestamp
    detection, whose visibility flag also decides attainment success.
    """

    station_id: str
    t_start: float
    t_end: float
    representative_pose: Pose2
    detection_count: int
    fully_visible: bool

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError(f"visit window inverted: [{self.t_start}, {self.t_end}]")
        if self.detection_count < 1:
            raise ValueError("visit needs at least one detection")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.t_start + self.t_end)


@dataclass(frozen=True)
class ScheduleEntry:
    """Nominal dwell window for one (sequence, waypoint, round)."""

    sequence_id: str
    waypoint_id: str
    round_index: int
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.round_index < 0:
            raise ValueError(f"round must be >= 0, got {self.round_index}")
        if self.t_end < self.t_start:
            raise ValueError(f"schedule window inverted: [{self.t_start}, {self.t_end}]")


# ---------------------------------------------------------------------------
# file parsing


def _parse_bool(token: str, where: str) -> bool:
    low = token.lower()
    if low in ("1", "true"):
        return True
    if low in ("0", "false"):
        return False
    raise DetectionLogError(f"{where}: bad visibility flag {token!r} (use 0/1/true/false)")


def parse_detection_log(text: str, source: str = "<string>") -> List[Detection]:
    """Parse whitespace-separated detection rows
    ``timestamp station_id fully_visible tx ty tz qx qy qz qw``.

    Returns detections sorted by timestamp (stable across stations).
    Lines starting with ``#`` are comments.
    """
    detections = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        where = f"{source}:{lineno}"
        if len(fields) != 10:
            raise DetectionLogError(f"{where}: expected 10 fields, got {len(fields)}")
        try:
            timestamp = float(fields[0])
            numbers = [float(f) for f in fields[3:10]]
        except ValueError as exc:
            raise DetectionLogError(f"{where}: {exc}") from exc
        visible = _parse_bool(fields[2], where)
        try:
            pose = Pose3.from_xyz_quat(*numbers, normalize=True)
            det = Detection(timestamp, fields[1], pose, visible)
        except ValueError as exc:
            raise DetectionLogError(f"{where}: {exc}") from exc
        detections.append(det)
    detections.sort(key=lambda d: d.timestamp)
    return detections


def load_detection_log(path: Union[str, Path]) -> List[Detection]:
    path = Path(path)
    return parse_detection_log(path.read_text(), source=str(path))


def detections_by_station(detections: Iterable[Detection]) -> Dict[str, List[Detection]]:
    """Group detections per station, each list time-sorted."""
    out: Dict[str, List[Detection]] = {}
    for det in detections:
        out.setdefault(det.station_id, []).append(det)
    for dets in out.values():
        dets.sort(key=lambda d: d.timestamp)
    return out


def load_schedule(text_or_path: Union[str, Path], source: str = "<string>") -> List[ScheduleEntry]:
    """Parse schedule rows ``sequence_id waypoint_id round t_start t_end``."""
    if isinstance(text_or_path, Path):
        source = str(text_or_path)
        text = text_or_path.read_text()
    else:
        text = text_or_path
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        where = f"{source}:{lineno}"
        if len(fields) != 5:
            raise InputFormatError(f"{where}: expected 5 fields, got {len(fields)}")
        try:
            entry = ScheduleEntry(
                fields[0], fields[1], int(fields[2]), float(fields[3]), float(fields[4])
            )
        except ValueError as exc:
            raise InputFormatError(f"{where}: {exc}") from exc
        entries.append(entry)
    return entries


def dump_schedule(entries: Sequence[ScheduleEntry]) -> str:
    lines = ["# sequence_id waypoint_id round t_start t_end"]
    for e in entries:
        lines.append(
            f"{e.sequence_id} {e.waypoint_id} {e.round_index} {e.t_start!r} {e.t_end!r}"
        )
    return "\n".join(lines) + "\n"


def load_station_map(text_or_path: Union[str, Path], source: str = "<string>") -> Dict[str, str]:
    """Parse station-map rows ``station_id waypoint_id``.

    The mapping must be injective: one station per waypoint and one
    waypoint per station.
    """
    if isinstance(text_or_path, Path):
        source = str(text_or_path)
        text = text_or_path.read_text()
    else:
        text = text_or_path
    mapping: Dict[str, str] = {}
    claimed: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        where = f"{source}:{lineno}"
        if len(fields) != 2:
            raise InputFormatError(f"{where}: expected 2 fields, got {len(fields)}")
        station, waypoint = fields
        if station in mapping:
            raise InputFormatError(f"{where}: station {station!r} mapped twice")
        if waypoint in claimed:
            raise InputFormatError(
                f"{where}: waypoint {waypoint!r} already observed by station {claimed[waypoint]!r}"
            )
        mapping[station] = waypoint
        claimed[waypoint] = station
    return mapping


# ---------------------------------------------------------------------------
# clustering


def cluster_visits(
    detections: Sequence[Detection],
    gap_max: float = DEFAULT_GAP_MAX_S,
    dwell_min: float = DEFAULT_DWELL_MIN_S,
) -> List[Visit]:
    """Merge one station's time-sorted detections into dwell visits.

    Consecutive detections at most ``gap_max`` apart belong to one visit;
    visits shorter than ``dwell_min`` (drive-bys) are discarded.
    """
    if gap_max < 0 or dwell_min < 0:
        raise ValueError("gap_max and dwell_min must be >= 0")
    if not detections:
        return []
    station = detections[0].station_id
    for a, b in zip(detections, detections[1:]):
        if b.timestamp < a.timestamp:
            raise ValueError("detections must be time-sorted")
    if any(d.station_id != station for d in detections):
        raise ValueError("cluster_visits expects detections from a single station")

    groups: List[List[Detection]] = [[detections[0]]]
    for det in detections[1:]:
        if det.timestamp - groups[-1][-1].timestamp <= gap_max:
            groups[-1].append(det)
        else:
            groups.append([det])

    visits = []
    for group in groups:
        duration = group[-1].timestamp - group[0].timestamp
        if duration < dwell_min:
            continue
        rep = group[len(group) // 2]
        visits.append(
            Visit(
                station_id=station,
                t_start=group[0].timestamp,
                t_end=group[-1].timestamp,
                representative_pose=project_se3_to_se2(rep.pose),
                detection_count=len(group),
                fully_visible=rep.fully_visible,
            )
        )
    return visits


# ---------------------------------------------------------------------------
# association


@dataclass
class IngestResult:
    """Outcome of associating visits with the nominal schedule.

    The attainment file format has no failure column: failed or missing
    rounds are simply absent from the table, and are itemized here for
    reporting.
    """

    table: AttainmentTable
    matched: List[Tuple[ScheduleEntry, Visit]] = field(default_factory=list)
    failed_visibility: List[Tuple[ScheduleEntry, Visit]] = field(default_factory=list)
    missing: List[ScheduleEntry] = field(default_factory=list)
    orphans: List[Visit] = field(default_factory=list)


def associate_visits(
    visits_by_station: Mapping[str, Sequence[Visit]],
    schedule: Sequence[ScheduleEntry],
    station_map: Mapping[str, str],
    skew_tol: float = DEFAULT_SKEW_TOL_S,
    rounds: Optional[int] = None,
) -> IngestResult:
    """Assign visits to schedule entries by window containment.

    A visit matches the entry (for its station's waypoint) whose nominal
    window, expanded by ``skew_tol`` on both sides, contains the visit
    midpoint.  Matched fully-visible visits become attainment records in
    the station's frame; others are reported as failures, missing rounds,
    or orphans.

    Raises
    ------
    InputFormatError
        A station with visits is absent from the station map.
    AssociationAmbiguityError
        One visit falls in two entry windows, or two visits claim the
        same entry.
    """
    if skew_tol < 0:
        raise ValueError(f"skew_tol must be >= 0, got {skew_tol!r}")
    if not schedule:
        raise InputFormatError("associate_visits: empty schedule")
    if rounds is None:
        rounds = max(e.round_index for e in schedule)
        if rounds < 1:
            raise InputFormatError("schedule contains no scored rounds")

    universe: List[Tuple[str, str]] = []
    for e in schedule:
        cell = (e.sequence_id, e.waypoint_id)
        if cell not in universe:
            universe.append(cell)
    table = AttainmentTable(rounds, universe)

    by_waypoint: Dict[str, List[ScheduleEntry]] = {}
    for e in schedule:
        by_waypoint.setdefault(e.waypoint_id, []).append(e)
    for entries in by_waypoint.values():
        entries.sort(key=lambda e: (e.t_start, e.round_index))

    result = IngestResult(table)
    claimed: Dict[Tuple[str, str, int], Visit] = {}

    for station in sorted(visits_by_station):
        visits = visits_by_station[station]
        if visits and station not in station_map:
            raise InputFormatError(f"station {station!r} not in station map")
        waypoint_id = station_map.get(station)
        candidates = by_waypoint.get(waypoint_id, [])
        for visit in sorted(visits, key=lambda v: v.t_start):
            hits = [
                e
                for e in candidates
                if e.t_start - skew_tol <= visit.midpoint <= e.t_end + skew_tol
            ]
            if len(hits) > 1:
                raise AssociationAmbiguityError(
                    f"visit at station {station!r} (midpoint {visit.midpoint:.3f}) "
                    f"falls in {len(hits)} schedule windows: "
                    + ", ".join(
                        f"({e.sequence_id}, {e.waypoint_id}, round {e.round_index})"
                        for e in hits
                    )
                )
            if not hits:
                result.orphans.append(visit)
                continue
            entry = hits[0]
            key = (entry.sequence_id, entry.waypoint_id, entry.round_index)
            if key in claimed:
                other = claimed[key]
                raise AssociationAmbiguityError(
                    f"schedule entry {key!r} claimed by two visits at station "
                    f"{station!r}: midpoints {other.midpoint:.3f} and {visit.midpoint:.3f}"
                )
            claimed[key] = visit
            if not visit.fully_visible:
                result.failed_visibility.append((entry, visit))
                continue
            table.mark_attainment(
                AttainmentRecord(
                    sequence_id=entry.sequence_id,
                    waypoint_id=entry.waypoint_id,
                    round_index=entry.round_index,
                    measured_pose=visit.representative_pose,
                    frame_id=station,
                    timestamp=visit.midpoint,
                )
            )
            result.matched.append((entry, visit))

    matched_keys = set(claimed)
    for e in schedule:
        if (e.sequence_id, e.waypoint_id, e.round_index) not in matched_keys:
            result.missing.append(e)
    return result


def local_frame_records(table: AttainmentTable) -> AttainmentTable:
    """Validate the per-waypoint local-frame invariant.

    Every waypoint's records must already share a single frame (the
    observing station); poses are passed through untouched since no
    global registration exists to re-express them in.  Mixed frames in
    one cell raise :class:`FrameMismatchError`.
    """
    for seq_id, wp_id in table.waypoints():
        frames = {r.frame_id for r in table.records(seq_id, wp_id, include_priming=True)}
        if len(frames) > 1:
            raise FrameMismatchError(
                f"waypoint ({seq_id!r}, {wp_id!r}) has records from several "
                f"frames: {sorted(frames)}"
            )
    return table


def ingest(
    log_texts: Sequence[Tuple[str, str]],
    schedule: Sequence[ScheduleEntry],
    station_map: Mapping[str, str],
    gap_max: float = DEFAULT_GAP_MAX_S,
    dwell_min: float = DEFAULT_DWELL_MIN_S,
    skew_tol: float = DEFAULT_SKEW_TOL_S,
    rounds: Optional[int] = None,
) -> IngestResult:
    """Full pipeline: parse logs, cluster per station, associate, validate.

    ``log_texts`` is a list of (source label, file content) pairs; one
    file may carry several stations' detections.
    """
    all_detections: List[Detection] = []
    for source, text in log_texts:
        all_detections.extend(parse_detection_log(text, source=source))
    visits = {
        station: cluster_visits(dets, gap_max=gap_max, dwell_min=dwell_min)
        for station, dets in detections_by_station(all_detections).items()
    }
    result = associate_visits(visits, schedule, station_map, skew_tol=skew_tol, rounds=rounds)
    local_frame_records(result.table)
    return result
