"""Aggregated benchmark reports.

Turns an attainment table into the full per-waypoint scoreboard: accuracy
and precision in both physical and robot-relative units, completeness,
cumulative curves with their normalized area scores, and distribution
summaries.  Also houses the framewise report document, the run manifest,
and the schemas every emitted document is validated against.
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import jsonschema

from .errors import DegenerateMeanError, ScenarioError
from .framewise import FramewiseReport
from .metrics import (
    CompletenessResult,
    CumulativeCurve,
    DistributionSummary,
    WaypointAccuracy,
    WaypointPrecision,
    completeness,
    cumulative_curve,
    distribution_summary,
    normalized_auc,
    to_task_units,
    waypoint_accuracy,
    waypoint_precision,
)
from .task import TASK_FRAME, AttainmentTable, RobotProfile, Scenario

DEFAULT_THRESHOLD_COUNT = 200


@dataclass(frozen=True)
class WaypointRow:
    """One scoreboard line: attainment count plus the per-waypoint metrics
    that could be computed for it."""

    sequence_id: str
    waypoint_id: str
    frame_id: Optional[str]
    rounds_attained: int
    rounds_total: int
    completed: bool
    precision: Optional[WaypointPrecision]
    accuracy: Optional[WaypointAccuracy]
    heading_degenerate: bool = False


@dataclass(frozen=True)
class MetricsReport:
    robot: RobotProfile
    rounds: int
    rows: Tuple[WaypointRow, ...]
    completeness: CompletenessResult
    curves: Mapping[str, CumulativeCurve]
    nauc: Mapping[str, float]
    summaries: Mapping[str, DistributionSummary]
    x_max_position_m: float
    x_max_orientation_rad: float

    @property
    def has_accuracy(self) -> bool:
        return any(row.accuracy is not None for row in self.rows)

    @property
    def degenerate_waypoints(self) -> Tuple[Tuple[str, str], ...]:
        return tuple(
            (r.sequence_id, r.waypoint_id) for r in self.rows if r.heading_degenerate
        )


def default_x_max(profile: RobotProfile) -> Tuple[float, float]:
    """Normalization ranges: 1.5 robot diameters for position, a quarter
    field of view for orientation."""
    return 1.5 * profile.diameter_m, profile.fov_rad / 4.0


def evaluate_attainment(
    scenario: Scenario,
    table: AttainmentTable,
    *,
    x_max_position_m: Optional[float] = None,
    x_max_orientation_rad: Optional[float] = None,
    threshold_count: int = DEFAULT_THRESHOLD_COUNT,
) -> MetricsReport:
    """Score a table against its scenario.

    Accuracy is computed only for waypoints whose records live in the task
    frame, where the scenario's target poses are meaningful references;
    local-frame records (real-world per-station measurements) get
    precision and completeness only.  Incomplete waypoints never enter
    the curves or the summaries, which is what makes the curves plateau
    at the completeness ratio.  A waypoint whose headings have no defined
    circular mean is flagged instead of scored.
    """
    if threshold_count < 2:
        raise ValueError("threshold_count must be at least 2")
    default_pos, default_ang = default_x_max(scenario.robot)
    x_pos = default_pos if x_max_position_m is None else float(x_max_position_m)
    x_ang = default_ang if x_max_orientation_rad is None else float(x_max_orientation_rad)
    if x_pos <= 0 or x_ang <= 0:
        raise ValueError("x_max values must be positive")

    rounds = table.rounds
    comp = completeness(table)
    rows: List[WaypointRow] = []
    for seq_id, wp_id in table.waypoints():
        try:
            target = scenario.sequence(seq_id).waypoint(wp_id)
        except KeyError:
            raise ScenarioError(
                f"table waypoint ({seq_id!r}, {wp_id!r}) is not in the scenario"
            )
        records = table.records(seq_id, wp_id)
        attained = table.m_ki(seq_id, wp_id)
        frame = records[0].frame_id if records else None
        precision = None
        accuracy = None
        degenerate = False
        if records:
            try:
                precision = waypoint_precision(records)
            except DegenerateMeanError:
                degenerate = True
            if frame == TASK_FRAME and not degenerate:
                accuracy = waypoint_accuracy(records, target.pose, reference_frame=TASK_FRAME)
        rows.append(
            WaypointRow(
                sequence_id=seq_id,
                waypoint_id=wp_id,
                frame_id=frame,
                rounds_attained=attained,
                rounds_total=rounds,
                completed=attained == rounds,
                precision=precision,
                accuracy=accuracy,
                heading_degenerate=degenerate,
            )
        )

    total = len(rows)
    scored = [r for r in rows if r.completed and not r.heading_degenerate]
    pools: Dict[str, Tuple[List[float], float]] = {
        "position_precision": ([r.precision.position_m for r in scored], x_pos),
        "orientation_precision": ([r.precision.orientation_rad for r in scored], x_ang),
    }
    with_accuracy = [r for r in scored if r.accuracy is not None]
    if any(r.accuracy is not None for r in rows):
        pools["position_accuracy"] = ([r.accuracy.position_m for r in with_accuracy], x_pos)
        pools["orientation_accuracy"] = ([r.accuracy.orientation_rad for r in with_accuracy], x_ang)

    curves: Dict[str, CumulativeCurve] = {}
    nauc: Dict[str, float] = {}
    summaries: Dict[str, DistributionSummary] = {}
    for name, (values, x_max) in pools.items():
        thresholds = np.linspace(0.0, x_max, threshold_count)
        curve = cumulative_curve(values, total, thresholds)
        curves[name] = curve
        nauc[name] = normalized_auc(curve)
        if values:
            summaries[name] = distribution_summary(values)

    return MetricsReport(
        robot=scenario.robot,
        rounds=rounds,
        rows=tuple(rows),
        completeness=comp,
        curves=curves,
        nauc=nauc,
        summaries=summaries,
        x_max_position_m=x_pos,
        x_max_orientation_rad=x_ang,
    )


# ---------------------------------------------------------------------------
# document serialization


def _pair_document(profile: RobotProfile, position_m: float, orientation_rad: float) -> dict:
    return {
        "position_m": position_m,
        "orientation_rad": orientation_rad,
        "position_diameters": to_task_units(position_m, profile, "position"),
        "orientation_fov": to_task_units(orientation_rad, profile, "angle"),
    }


def _curve_document(curve: CumulativeCurve) -> dict:
    return {
        "x_max": curve.x_max,
        "thresholds": list(curve.thresholds),
        "fraction_below": list(curve.fraction_below),
    }


def _summary_document(s: DistributionSummary) -> dict:
    return {
        "mean": s.mean,
        "q1": s.q1,
        "median": s.median,
        "q3": s.q3,
        "min": s.min,
        "max": s.max,
        "count": s.count,
    }


def report_to_document(report: MetricsReport) -> dict:
    """Serialize to the waypoint-metrics report document (schema-checked)."""
    profile = report.robot
    waypoints = []
    for row in report.rows:
        entry = {
            "sequence_id": row.sequence_id,
            "waypoint_id": row.waypoint_id,
            "frame_id": row.frame_id,
            "rounds_attained": row.rounds_attained,
            "rounds_total": row.rounds_total,
            "completed": row.completed,
            "heading_degenerate": row.heading_degenerate,
            "precision": None
            if row.precision is None
            else _pair_document(profile, row.precision.position_m, row.precision.orientation_rad),
            "accuracy": None
            if row.accuracy is None
            else _pair_document(profile, row.accuracy.position_m, row.accuracy.orientation_rad),
        }
        waypoints.append(entry)
    document = {
        "schema": "navbench-report/1",
        "kind": "waypoint_metrics",
        "robot": {"diameter_m": profile.diameter_m, "fov_deg": profile.fov_deg},
        "rounds": report.rounds,
        "completeness": {
            "ratio": report.completeness.ratio,
            "completed": report.completeness.completed,
            "total": report.completeness.total,
        },
        "x_max": {
            "position_m": report.x_max_position_m,
            "orientation_rad": report.x_max_orientation_rad,
        },
        "has_accuracy": report.has_accuracy,
        "degenerate_waypoints": [list(pair) for pair in report.degenerate_waypoints],
        "waypoints": waypoints,
        "curves": {name: _curve_document(c) for name, c in report.curves.items()},
        "nauc": dict(report.nauc),
        "summaries": {name: _summary_document(s) for name, s in report.summaries.items()},
    }
    validate_document(document)
    return document


def framewise_to_document(
    groups: Sequence[Tuple[str, FramewiseReport]],
    *,
    assoc_tol_s: float,
) -> dict:
    """Serialize one or more framewise evaluations into a single document."""
    group_docs = []
    for name, rep in groups:
        group_docs.append(
            {
                "name": name,
                "run_count": rep.n_runs,
                "frame_count": rep.n_frames,
                "aligned": rep.aligned,
                "precision": {
                    "position_m": rep.position_precision,
                    "rotation_rad": rep.rotation_precision,
                },
                "accuracy": None
                if rep.position_accuracy is None
                else {
                    "position_m": rep.position_accuracy,
                    "rotation_rad": rep.rotation_accuracy,
                },
                "frames": {
                    "timestamps": [float(t) for t in rep.times],
                    "position_precision_m": [float(v) for v in rep.position_precision_per_frame],
                    "rotation_precision_rad": [float(v) for v in rep.rotation_precision_per_frame],
                    "position_accuracy_m": None
                    if rep.position_accuracy_per_frame is None
                    else [float(v) for v in rep.position_accuracy_per_frame],
                    "rotation_accuracy_rad": None
                    if rep.rotation_accuracy_per_frame is None
                    else [float(v) for v in rep.rotation_accuracy_per_frame],
                },
            }
        )
    document = {
        "schema": "navbench-report/1",
        "kind": "framewise_metrics",
        "assoc_tol_s": assoc_tol_s,
        "groups": group_docs,
    }
    validate_document(document)
    return document


def ingest_to_document(result, sources: Sequence[str]) -> dict:
    """Serialize an ingestion outcome: counts plus every visit that did not
    become a record, so nothing fails silently."""
    def visit_entry(v):
        return {
            "station_id": v.station_id,
            "midpoint_s": v.midpoint,
            "duration_s": v.t_end - v.t_start,
        }

    document = {
        "schema": "navbench-report/1",
        "kind": "ingest_summary",
        "sources": list(sources),
        "matched": len(result.matched),
        "failed_visibility": [
            {
                "sequence_id": e.sequence_id,
                "waypoint_id": e.waypoint_id,
                "round": e.round_index,
                **visit_entry(v),
            }
            for e, v in result.failed_visibility
        ],
        "orphans": [visit_entry(v) for v in result.orphans],
        "missing": [
            {
                "sequence_id": e.sequence_id,
                "waypoint_id": e.waypoint_id,
                "round": e.round_index,
            }
            for e in result.missing
        ],
    }
    validate_document(document)
    return document


# ---------------------------------------------------------------------------
# schemas

_METRIC_PAIR = {
    "type": ["object", "null"],
    "properties": {
        "position_m": {"type": "number", "minimum": 0},
        "orientation_rad": {"type": "number", "minimum": 0},
        "position_diameters": {"type": "number", "minimum": 0},
        "orientation_fov": {"type": "number", "minimum": 0},
    },
    "required": ["position_m", "orientation_rad", "position_diameters", "orientation_fov"],
    "additionalProperties": False,
}

_CURVE = {
    "type": "object",
    "properties": {
        "x_max": {"type": "number", "exclusiveMinimum": 0},
        "thresholds": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "fraction_below": {
            "type": "array",
            "items": {"type": "number", "minimum": 0, "maximum": 1},
            "minItems": 2,
        },
    },
    "required": ["x_max", "thresholds", "fraction_below"],
    "additionalProperties": False,
}

_SUMMARY = {
    "type": "object",
    "properties": {
        "mean": {"type": "number"},
        "q1": {"type": "number"},
        "median": {"type": "number"},
        "q3": {"type": "number"},
        "min": {"type": "number"},
        "max": {"type": "number"},
        "count": {"type": "integer", "minimum": 1},
    },
    "required": ["mean", "q1", "median", "q3", "min", "max", "count"],
    "additionalProperties": False,
}

WAYPOINT_REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "schema": {"const": "navbench-report/1"},
        "kind": {"const": "waypoint_metrics"},
        "robot": {
            "type": "object",
            "properties": {
                "diameter_m": {"type": "number", "exclusiveMinimum": 0},
                "fov_deg": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 360},
            },
            "required": ["diameter_m", "fov_deg"],
            "additionalProperties": False,
        },
        "rounds": {"type": "integer", "minimum": 1},
        "completeness": {
            "type": "object",
            "properties": {
                "ratio": {"type": "number", "minimum": 0, "maximum": 1},
                "completed": {"type": "integer", "minimum": 0},
                "total": {"type": "integer", "minimum": 1},
            },
            "required": ["ratio", "completed", "total"],
            "additionalProperties": False,
        },
        "x_max": {
            "type": "object",
            "properties": {
                "position_m": {"type": "number", "exclusiveMinimum": 0},
                "orientation_rad": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["position_m", "orientation_rad"],
            "additionalProperties": False,
        },
        "has_accuracy": {"type": "boolean"},
        "degenerate_waypoints": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        },
        "waypoints": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "sequence_id": {"type": "string"},
                    "waypoint_id": {"type": "string"},
                    "frame_id": {"type": ["string", "null"]},
                    "rounds_attained": {"type": "integer", "minimum": 0},
                    "rounds_total": {"type": "integer", "minimum": 1},
                    "completed": {"type": "boolean"},
                    "heading_degenerate": {"type": "boolean"},
                    "precision": _METRIC_PAIR,
                    "accuracy": _METRIC_PAIR,
                },
                "required": [
                    "sequence_id",
                    "waypoint_id",
                    "frame_id",
                    "rounds_attained",
                    "rounds_total",
                    "completed",
                    "heading_degenerate",
                    "precision",
                    "accuracy",
                ],
                "additionalProperties": False,
            },
        },
        "curves": {"type": "object", "additionalProperties": _CURVE},
        "nauc": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1},
        },
        "summaries": {"type": "object", "additionalProperties": _SUMMARY},
    },
    "required": [
        "schema",
        "kind",
        "robot",
        "rounds",
        "completeness",
        "x_max",
        "has_accuracy",
        "degenerate_waypoints",
        "waypoints",
        "curves",
        "nauc",
        "summaries",
    ],
    "additionalProperties": False,
}

FRAMEWISE_REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "schema": {"const": "navbench-report/1"},
        "kind": {"const": "framewise_metrics"},
        "assoc_tol_s": {"type": "number", "exclusiveMinimum": 0},
        "groups": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "run_count": {"type": "integer", "minimum": 1},
                    "frame_count": {"type": "integer", "minimum": 0},
                    "aligned": {"type": "boolean"},
                    "precision": {
                        "type": "object",
                        "properties": {
                            "position_m": {"type": "number", "minimum": 0},
                            "rotation_rad": {"type": "number", "minimum": 0},
                        },
                        "required": ["position_m", "rotation_rad"],
                        "additionalProperties": False,
                    },
                    "accuracy": {
                        "type": ["object", "null"],
                        "properties": {
                            "position_m": {"type": "number", "minimum": 0},
                            "rotation_rad": {"type": "number", "minimum": 0},
                        },
                        "required": ["position_m", "rotation_rad"],
                        "additionalProperties": False,
                    },
                    "frames": {
                        "type": "object",
                        "properties": {
                            "timestamps": {"type": "array", "items": {"type": "number"}},
                            "position_precision_m": {"type": "array", "items": {"type": "number"}},
                            "rotation_precision_rad": {"type": "array", "items": {"type": "number"}},
                            "position_accuracy_m": {
                                "type": ["array", "null"],
                                "items": {"type": "number"},
                            },
                            "rotation_accuracy_rad": {
                                "type": ["array", "null"],
                                "items": {"type": "number"},
                            },
                        },
                        "required": [
                            "timestamps",
                            "position_precision_m",
                            "rotation_precision_rad",
                            "position_accuracy_m",
                            "rotation_accuracy_rad",
                        ],
                        "additionalProperties": False,
                    },
                },
                "required": [
                    "name",
                    "run_count",
                    "frame_count",
                    "aligned",
                    "precision",
                    "accuracy",
                    "frames",
                ],
                "additionalProperties": False,
            },
        },
    },
    "required": ["schema", "kind", "assoc_tol_s", "groups"],
    "additionalProperties": False,
}

_VISIT_ENTRY = {
    "type": "object",
    "properties": {
        "station_id": {"type": "string"},
        "midpoint_s": {"type": "number"},
        "duration_s": {"type": "number", "minimum": 0},
    },
    "required": ["station_id", "midpoint_s", "duration_s"],
    "additionalProperties": False,
}

_FAILED_ENTRY = {
    "type": "object",
    "properties": {
        "sequence_id": {"type": "string"},
        "waypoint_id": {"type": "string"},
        "round": {"type": "integer", "minimum": 0},
        "station_id": {"type": "string"},
        "midpoint_s": {"type": "number"},
        "duration_s": {"type": "number", "minimum": 0},
    },
    "required": ["sequence_id", "waypoint_id", "round", "station_id", "midpoint_s", "duration_s"],
    "additionalProperties": False,
}

INGEST_REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "schema": {"const": "navbench-report/1"},
        "kind": {"const": "ingest_summary"},
        "sources": {"type": "array", "items": {"type": "string"}},
        "matched": {"type": "integer", "minimum": 0},
        "failed_visibility": {"type": "array", "items": _FAILED_ENTRY},
        "orphans": {"type": "array", "items": _VISIT_ENTRY},
        "missing": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "sequence_id": {"type": "string"},
                    "waypoint_id": {"type": "string"},
                    "round": {"type": "integer", "minimum": 0},
                },
                "required": ["sequence_id", "waypoint_id", "round"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["schema", "kind", "sources", "matched", "failed_visibility", "orphans", "missing"],
    "additionalProperties": False,
}

MANIFEST_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "schema": {"const": "navbench-manifest/1"},
        "command": {"type": "string"},
        "config_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "inputs": {
            "type": "object",
            "additionalProperties": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        },
        "tool_version": {"type": "string"},
        "duration_s": {"type": "number", "minimum": 0},
    },
    "required": [
        "schema",
        "command",
        "config_digest",
        "seeds",
        "inputs",
        "tool_version",
        "duration_s",
    ],
    "additionalProperties": False,
}

_SCHEMAS_BY_KIND = {
    "waypoint_metrics": WAYPOINT_REPORT_SCHEMA,
    "framewise_metrics": FRAMEWISE_REPORT_SCHEMA,
    "ingest_summary": INGEST_REPORT_SCHEMA,
}


def validate_document(document: dict) -> None:
    """Check an emitted document against its published schema.

    Raises ``jsonschema.ValidationError`` on any mismatch; called by every
    serializer so a malformed report can never be written.
    """
    if document.get("schema") == "navbench-manifest/1":
        jsonschema.validate(document, MANIFEST_SCHEMA)
        return
    kind = document.get("kind")
    schema = _SCHEMAS_BY_KIND.get(kind)
    if schema is None:
        raise ValueError(f"unknown document kind: {kind!r}")
    jsonschema.validate(document, schema)


# ---------------------------------------------------------------------------
# artifact plumbing


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every artifact set."""

    command: str
    config_digest: str
    seeds: Tuple[int, ...]
    inputs: Mapping[str, str]
    tool_version: str
    duration_s: float

    def to_document(self) -> dict:
        document = {
            "schema": "navbench-manifest/1",
            "command": self.command,
            "config_digest": self.config_digest,
            "seeds": list(self.seeds),
            "inputs": dict(self.inputs),
            "tool_version": self.tool_version,
            "duration_s": self.duration_s,
        }
        validate_document(document)
        return document


def canonical_json(obj) -> str:
    """Stable serialization used for digests: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(config: Mapping) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def file_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dump_json(document: dict) -> str:
    """Human-readable but still deterministic rendering for artifacts."""
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# curve files


def dump_curve(curve: CumulativeCurve) -> str:
    lines = ["threshold,fraction_below"]
    for t, f in zip(curve.thresholds, curve.fraction_below):
        lines.append(f"{t!r},{f!r}")
    return "\n".join(lines) + "\n"


def save_curve(curve: CumulativeCurve, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_curve(curve), encoding="utf-8")


def load_curve(path_or_text: Union[str, Path]) -> CumulativeCurve:
    if isinstance(path_or_text, Path) or (
        path_or_text and "\n" not in path_or_text and Path(path_or_text).is_file()
    ):
        text = Path(path_or_text).read_text(encoding="utf-8")
    else:
        text = path_or_text
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "threshold,fraction_below":
        raise ValueError("curve file must start with 'threshold,fraction_below'")
    thresholds = []
    fractions = []
    for ln in lines[1:]:
        t, f = ln.split(",")
        thresholds.append(float(t))
        fractions.append(float(f))
    return CumulativeCurve(tuple(thresholds), tuple(fractions), thresholds[-1])
