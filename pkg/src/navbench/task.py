"""Benchmark description and execution records.

A benchmark is a scenario: one robot profile, one protocol, and one or
more waypoint sequences authored in a shared task frame.  Executing it
produces attainment records (one recorded pose per reached waypoint per
round) collected in an :class:`AttainmentTable`.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence as SequenceT, Tuple, Union

import yaml

from .errors import (
    DuplicateRecordError,
    FrameMismatchError,
    ScenarioError,
)
from .geometry import Pose2

TASK_FRAME = "task"


class Mode(enum.Enum):
    """Whether the robot navigates on a fresh map each round or reuses one."""

    WITHOUT_MAP = "without_map"
    WITH_MAP = "with_map"


@dataclass(frozen=True)
class Waypoint:
    id: str
    pose: Pose2

    def __post_init__(self):
        if not self.id:
            raise ScenarioError("waypoint id must be a non-empty string")


@dataclass(frozen=True)
class Sequence:
    """An ordered tour of waypoints plus the pose the robot starts from."""

    id: str
    start_pose: Pose2
    waypoints: Tuple[Waypoint, ...]

    def __post_init__(self):
        if not self.id:
            raise ScenarioError("sequence id must be a non-empty string")
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 1:
            raise ScenarioError(f"sequence {self.id!r} has no waypoints")
        seen = set()
        for w in self.waypoints:
            if w.id in seen:
                raise ScenarioError(f"sequence {self.id!r} has duplicate waypoint id {w.id!r}")
            seen.add(w.id)

    def waypoint(self, waypoint_id: str) -> Waypoint:
        for w in self.waypoints:
            if w.id == waypoint_id:
                return w
        raise KeyError(f"no waypoint {waypoint_id!r} in sequence {self.id!r}")


@dataclass(frozen=True)
class RobotProfile:
    """Physical scales that define task units: footprint diameter and
    camera field of view."""

    diameter_m: float
    fov_deg: float

    def __post_init__(self):
        if not (math.isfinite(self.diameter_m) and self.diameter_m > 0):
            raise ScenarioError(f"robot diameter must be positive, got {self.diameter_m!r}")
        if not (math.isfinite(self.fov_deg) and 0 < self.fov_deg < 360):
            raise ScenarioError(f"fov_deg must lie in (0, 360), got {self.fov_deg!r}")

    @property
    def fov_rad(self) -> float:
        return math.radians(self.fov_deg)


@dataclass(frozen=True)
class Protocol:
    """How a scenario is executed: round count, mapping mode, dwell pause,
    and the arrival test applied at each waypoint."""

    rounds: int = 5
    mode: Mode = Mode.WITHOUT_MAP
    pause_s: float = 5.0
    arrival_pos_tol_m: float = 0.05
    arrival_ang_tol_rad: float = 0.05
    timeout_s: float = 120.0

    def __post_init__(self):
        if not (isinstance(self.rounds, int) and self.rounds >= 1):
            raise ScenarioError(f"rounds must be a positive integer, got {self.rounds!r}")
        if not isinstance(self.mode, Mode):
            raise ScenarioError(f"mode must be a Mode, got {self.mode!r}")
        if not (math.isfinite(self.pause_s) and self.pause_s >= 0):
            raise ScenarioError(f"pause_s must be >= 0, got {self.pause_s!r}")
        for name in ("arrival_pos_tol_m", "arrival_ang_tol_rad", "timeout_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ScenarioError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class Scenario:
    robot: RobotProfile
    protocol: Protocol
    sequences: Tuple[Sequence, ...]

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if len(self.sequences) < 1:
            raise ScenarioError("scenario needs at least one sequence")
        seen = set()
        for s in self.sequences:
            if s.id in seen:
                raise ScenarioError(f"duplicate sequence id {s.id!r}")
            seen.add(s.id)

    def sequence(self, sequence_id: str) -> Sequence:
        for s in self.sequences:
            if s.id == sequence_id:
                return s
        raise KeyError(f"no sequence {sequence_id!r}")

    def waypoint_universe(self) -> Tuple[Tuple[str, str], ...]:
        """All (sequence_id, waypoint_id) pairs, in authored order."""
        return tuple((s.id, w.id) for s in self.sequences for w in s.waypoints)

    def total_waypoints(self) -> int:
        return sum(len(s.waypoints) for s in self.sequences)

    def with_protocol(self, **changes) -> "Scenario":
        return replace(self, protocol=replace(self.protocol, **changes))


# ---------------------------------------------------------------------------
# scenario document I/O


def _req(mapping: Mapping, key: str, where: str):
    if not isinstance(mapping, Mapping):
        raise ScenarioError(f"{where}: expected a mapping, got {type(mapping).__name__}")
    if key not in mapping:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _pose(value, where: str) -> Pose2:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ScenarioError(f"{where}: expected [x, y, theta], got {value!r}")
    try:
        return Pose2(*(_num(v, where) for v in value))
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def load_scenario(document: Mapping) -> Scenario:
    """Build a validated :class:`Scenario` from a parsed document tree.

    Error messages carry the key path of the offending field.
    """
    if not isinstance(document, Mapping):
        raise ScenarioError(f"scenario document must be a mapping, got {type(document).__name__}")

    robot_doc = _req(document, "robot", "scenario")
    robot = RobotProfile(
        diameter_m=_num(_req(robot_doc, "diameter_m", "robot"), "robot.diameter_m"),
        fov_deg=_num(_req(robot_doc, "fov_deg", "robot"), "robot.fov_deg"),
    )

    proto_doc = document.get("protocol", {})
    if not isinstance(proto_doc, Mapping):
        raise ScenarioError("protocol: expected a mapping")
    kwargs = {}
    if "rounds" in proto_doc:
        rounds = proto_doc["rounds"]
        if isinstance(rounds, bool) or not isinstance(rounds, int):
            raise ScenarioError(f"protocol.rounds: expected an integer, got {rounds!r}")
        kwargs["rounds"] = rounds
    if "mode" in proto_doc:
        try:
            kwargs["mode"] = Mode(proto_doc["mode"])
        except ValueError:
            valid = ", ".join(m.value for m in Mode)
            raise ScenarioError(
                f"protocol.mode: unknown mode {proto_doc['mode']!r} (expected one of: {valid})"
            ) from None
    for key in ("pause_s", "arrival_pos_tol_m", "arrival_ang_tol_rad", "timeout_s"):
        if key in proto_doc:
            kwargs[key] = _num(proto_doc[key], f"protocol.{key}")
    protocol = Protocol(**kwargs)

    seq_docs = _req(document, "sequences", "scenario")
    if not isinstance(seq_docs, (list, tuple)) or not seq_docs:
        raise ScenarioError("sequences: expected a non-empty list")
    sequences = []
    for si, sd in enumerate(seq_docs):
        where = f"sequences[{si}]"
        seq_id = _req(sd, "id", where)
        if not isinstance(seq_id, str) or not seq_id:
            raise ScenarioError(f"{where}.id: expected a non-empty string, got {seq_id!r}")
        start = _pose(_req(sd, "start", where), f"{where}.start")
        wp_docs = _req(sd, "waypoints", where)
        if not isinstance(wp_docs, (list, tuple)) or not wp_docs:
            raise ScenarioError(f"{where}.waypoints: expected a non-empty list")
        waypoints = []
        for wi, wd in enumerate(wp_docs):
            wwhere = f"{where}.waypoints[{wi}]"
            wp_id = _req(wd, "id", wwhere)
            if not isinstance(wp_id, str) or not wp_id:
                raise ScenarioError(f"{wwhere}.id: expected a non-empty string, got {wp_id!r}")
            waypoints.append(Waypoint(wp_id, _pose(_req(wd, "pose", wwhere), f"{wwhere}.pose")))
        sequences.append(Sequence(seq_id, start, tuple(waypoints)))
    return Scenario(robot, protocol, tuple(sequences))


def scenario_to_document(scenario: Scenario) -> dict:
    return {
        "robot": {
            "diameter_m": scenario.robot.diameter_m,
            "fov_deg": scenario.robot.fov_deg,
        },
        "protocol": {
            "rounds": scenario.protocol.rounds,
            "mode": scenario.protocol.mode.value,
            "pause_s": scenario.protocol.pause_s,
            "arrival_pos_tol_m": scenario.protocol.arrival_pos_tol_m,
            "arrival_ang_tol_rad": scenario.protocol.arrival_ang_tol_rad,
            "timeout_s": scenario.protocol.timeout_s,
        },
        "sequences": [
            {
                "id": s.id,
                "start": [s.start_pose.x, s.start_pose.y, s.start_pose.theta],
                "waypoints": [
                    {"id": w.id, "pose": [w.pose.x, w.pose.y, w.pose.theta]}
                    for w in s.waypoints
                ],
            }
            for s in scenario.sequences
        ],
    }


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package, by bare name
    (e.g. ``"small_house"``)."""
    root = Path(__file__).parent / "scenarios"
    path = root / f"{name}.yaml"
    if not path.exists():
        known = ", ".join(sorted(p.stem for p in root.glob("*.yaml"))) or "none"
        raise ScenarioError(f"no bundled scenario {name!r} (available: {known})")
    return path


def load_scenario_file(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        document = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML: {exc}") from exc
    try:
        return load_scenario(document)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def save_scenario_file(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(
        yaml.safe_dump(scenario_to_document(scenario), sort_keys=False)
    )


# ---------------------------------------------------------------------------
# attainment records

PRIMING_ROUND = 0


@dataclass(frozen=True)
class AttainmentRecord:
    """One recorded arrival: the measured pose at a waypoint in a round.

    Round 0 is the priming round; its records are stored but excluded
    from every metric.
    """

    sequence_id: str
    waypoint_id: str
    round_index: int
    measured_pose: Pose2
    frame_id: str = TASK_FRAME
    timestamp: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.round_index, int) and self.round_index >= 0):
            raise ValueError(f"round_index must be an integer >= 0, got {self.round_index!r}")
        if not self.frame_id:
            raise ValueError("frame_id must be non-empty")

    @property
    def excluded(self) -> bool:
        return self.round_index == PRIMING_ROUND


_Cell = Tuple[str, str]


class AttainmentTable:
    """Records keyed by (sequence, waypoint, round).

    The table optionally carries a closed waypoint universe so that
    waypoints with zero records still enter completeness denominators.
    Without one, the universe is the set of waypoints seen so far.
    Mutation is single-writer; reads never mutate.
    """

    def __init__(
        self,
        rounds: int,
        universe: Optional[Iterable[_Cell]] = None,
    ):
        if not (isinstance(rounds, int) and rounds >= 1):
            raise ValueError(f"rounds must be a positive integer, got {rounds!r}")
        self.rounds = rounds
        self._closed = universe is not None
        self._cells: dict[_Cell, dict[int, AttainmentRecord]] = {}
        if universe is not None:
            for cell in universe:
                cell = (str(cell[0]), str(cell[1]))
                if cell in self._cells:
                    raise ValueError(f"duplicate waypoint {cell!r} in universe")
                self._cells[cell] = {}

    @classmethod
    def for_scenario(cls, scenario: Scenario) -> "AttainmentTable":
        return cls(scenario.protocol.rounds, scenario.waypoint_universe())

    @property
    def closed_universe(self) -> bool:
        return self._closed

    def waypoints(self) -> Tuple[_Cell, ...]:
        return tuple(self._cells.keys())

    def total_waypoints(self) -> int:
        return len(self._cells)

    def mark_attainment(self, record: AttainmentRecord) -> "AttainmentTable":
        """Insert one record; returns the table for chaining.

        Raises
        ------
        ValueError
            Round outside [0, rounds], or (with a closed universe) an
            unknown waypoint.
        DuplicateRecordError
            The (waypoint, round) slot is already filled.
        FrameMismatchError
            The record's frame differs from earlier records at the same
            waypoint.
        """
        if record.round_index > self.rounds:
            raise ValueError(
                f"round {record.round_index} out of range [0, {self.rounds}] "
                f"at {(record.sequence_id, record.waypoint_id)!r}"
            )
        cell = (record.sequence_id, record.waypoint_id)
        if cell not in self._cells:
            if self._closed:
                raise ValueError(f"unknown waypoint {cell!r} (closed universe)")
            self._cells[cell] = {}
        slot = self._cells[cell]
        if record.round_index in slot:
            raise DuplicateRecordError(
                f"waypoint {cell!r} already has a record for round {record.round_index}"
            )
        if slot:
            existing = next(iter(slot.values())).frame_id
            if record.frame_id != existing:
                raise FrameMismatchError(
                    f"waypoint {cell!r}: record frame {record.frame_id!r} "
                    f"conflicts with existing frame {existing!r}"
                )
        slot[record.round_index] = record
        return self

    def records(self, sequence_id: str, waypoint_id: str, include_priming: bool = False):
        """Records for one waypoint, sorted by round; priming excluded by
        default."""
        slot = self._cells.get((sequence_id, waypoint_id), {})
        rounds = sorted(slot)
        if not include_priming:
            rounds = [j for j in rounds if j != PRIMING_ROUND]
        return [slot[j] for j in rounds]

    def m_ki(self, sequence_id: str, waypoint_id: str) -> int:
        """Number of scored (non-priming) rounds recorded at a waypoint."""
        slot = self._cells.get((sequence_id, waypoint_id), {})
        return sum(1 for j in slot if j != PRIMING_ROUND)

    def all_records(self, include_priming: bool = False):
        out = []
        for seq_id, wp_id in self._cells:
            out.extend(self.records(seq_id, wp_id, include_priming=include_priming))
        return out

    def frame_of(self, sequence_id: str, waypoint_id: str) -> Optional[str]:
        slot = self._cells.get((sequence_id, waypoint_id), {})
        if not slot:
            return None
        return next(iter(slot.values())).frame_id


# ---------------------------------------------------------------------------
# attainment table I/O

ATTAINMENT_HEADER = ["sequence_id", "waypoint_id", "round", "frame_id", "timestamp", "x", "y", "theta"]


def dump_attainment(table: AttainmentTable) -> str:
    """Serialize to columnar text; floats use repr so reloading is exact
    and output is byte-stable."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ATTAINMENT_HEADER)
    for rec in table.all_records(include_priming=True):
        writer.writerow(
            [
                rec.sequence_id,
                rec.waypoint_id,
                rec.round_index,
                rec.frame_id,
                repr(rec.timestamp),
                repr(rec.measured_pose.x),
                repr(rec.measured_pose.y),
                repr(rec.measured_pose.theta),
            ]
        )
    return buf.getvalue()


def save_attainment(table: AttainmentTable, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_attainment(table))


def load_attainment(
    path_or_text: Union[str, Path],
    rounds: int,
    universe: Optional[Iterable[_Cell]] = None,
) -> AttainmentTable:
    """Parse a columnar attainment file.

    ``universe`` (e.g. ``scenario.waypoint_universe()``) closes the table
    so unrecorded waypoints still count toward completeness.
    """
    if isinstance(path_or_text, Path):
        text = path_or_text.read_text()
        src = str(path_or_text)
    elif isinstance(path_or_text, str) and path_or_text and "\n" not in path_or_text and Path(path_or_text).is_file():
        text = Path(path_or_text).read_text()
        src = path_or_text
    else:
        text = str(path_or_text)
        src = "<string>"

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ScenarioError(f"{src}: empty attainment file") from None
    if header != ATTAINMENT_HEADER:
        raise ScenarioError(
            f"{src}: bad header {header!r}, expected {ATTAINMENT_HEADER!r}"
        )
    table = AttainmentTable(rounds, universe)
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(ATTAINMENT_HEADER):
            raise ScenarioError(f"{src}:{lineno}: expected {len(ATTAINMENT_HEADER)} fields, got {len(row)}")
        try:
            rec = AttainmentRecord(
                sequence_id=row[0],
                waypoint_id=row[1],
                round_index=int(row[2]),
                frame_id=row[3],
                timestamp=float(row[4]),
                measured_pose=Pose2(float(row[5]), float(row[6]), float(row[7])),
            )
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"{src}:{lineno}: {exc}") from exc
        try:
            table.mark_attainment(rec)
        except (ValueError, DuplicateRecordError, FrameMismatchError) as exc:
            raise ScenarioError(f"{src}:{lineno}: {exc}") from exc
    return table
