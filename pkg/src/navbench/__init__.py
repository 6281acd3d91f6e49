"""Task-driven navigation repeatability benchmarking toolkit.

The package measures how precisely a robot returns to the same waypoints
over repeated tour rounds, separately from how accurately it hits the
surveyed targets, and rolls both up into completeness, cumulative
attainment curves, and a normalized area-under-curve score.

Modules
-------
geometry
    Planar and spatial poses, angle wrapping, circular means, quaternion
    utilities, rigid trajectory alignment.
task
    Scenario and protocol definitions, attainment tables, file formats.
metrics
    Per-waypoint accuracy and precision, completeness, cumulative
    curves, normalized AUC, robot-relative task units.
framewise
    Trajectory-level dispersion and error, frame association by
    timestamp, optional rigid alignment.
ingest
    Fiducial detection logs to attainment tables: visit clustering and
    schedule association under clock skew.
sim
    Differential-drive waypoint-tour simulator with pluggable
    localization models.
report
    JSON/CSV report emission with self-validating schemas and run
    manifests.
"""

from .errors import (
    AlignmentError,
    AssociationAmbiguityError,
    AssociationError,
    DegenerateMeanError,
    DegenerateProjectionError,
    DetectionLogError,
    DuplicateRecordError,
    FrameMismatchError,
    InputFormatError,
    NavBenchError,
    ScenarioError,
    TrajectoryFormatError,
)
from .framewise import (
    FramewiseReport,
    Trajectory,
    associate_runs,
    framewise_metrics,
    load_trajectory,
    parse_trajectory,
    save_trajectory,
)
from .geometry import (
    Pose2,
    Pose3,
    RigidTransform3,
    align_trajectories,
    angle_distance,
    circular_mean,
    pose2_to_pose3,
    project_se3_to_se2,
    quat_from_axis_angle,
    quat_from_yaw,
    quat_multiply,
    rotation_distance,
    rotation_mean,
    wrap_angle,
)
from .ingest import (
    Detection,
    IngestResult,
    ScheduleEntry,
    Visit,
    associate_visits,
    cluster_visits,
    ingest,
    load_detection_log,
    load_schedule,
    load_station_map,
    parse_detection_log,
)
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
from .report import (
    MetricsReport,
    RunManifest,
    WaypointRow,
    config_digest,
    default_x_max,
    evaluate_attainment,
    framewise_to_document,
    ingest_to_document,
    load_curve,
    report_to_document,
    save_curve,
    validate_document,
)
from .sim import (
    ControllerGains,
    LocalizerSpec,
    Outcome,
    SimResult,
    SimRunConfig,
    run_benchmark,
)
from .task import (
    TASK_FRAME,
    AttainmentRecord,
    AttainmentTable,
    Mode,
    Protocol,
    RobotProfile,
    Scenario,
    Sequence,
    Waypoint,
    bundled_scenario_path,
    load_attainment,
    load_scenario_file,
    save_attainment,
    save_scenario_file,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "AssociationAmbiguityError",
    "AssociationError",
    "AttainmentRecord",
    "AttainmentTable",
    "CompletenessResult",
    "ControllerGains",
    "CumulativeCurve",
    "DegenerateMeanError",
    "DegenerateProjectionError",
    "Detection",
    "DetectionLogError",
    "DistributionSummary",
    "DuplicateRecordError",
    "FrameMismatchError",
    "FramewiseReport",
    "IngestResult",
    "InputFormatError",
    "LocalizerSpec",
    "MetricsReport",
    "Mode",
    "NavBenchError",
    "Outcome",
    "Pose2",
    "Pose3",
    "Protocol",
    "RigidTransform3",
    "RobotProfile",
    "RunManifest",
    "Scenario",
    "ScenarioError",
    "ScheduleEntry",
    "Sequence",
    "SimResult",
    "SimRunConfig",
    "TASK_FRAME",
    "Trajectory",
    "TrajectoryFormatError",
    "Visit",
    "Waypoint",
    "WaypointAccuracy",
    "WaypointPrecision",
    "WaypointRow",
    "align_trajectories",
    "angle_distance",
    "associate_runs",
    "associate_visits",
    "bundled_scenario_path",
    "circular_mean",
    "cluster_visits",
    "completeness",
    "config_digest",
    "cumulative_curve",
    "default_x_max",
    "distribution_summary",
    "evaluate_attainment",
    "framewise_metrics",
    "framewise_to_document",
    "ingest",
    "ingest_to_document",
    "load_attainment",
    "load_curve",
    "load_detection_log",
    "load_schedule",
    "load_scenario_file",
    "load_station_map",
    "load_trajectory",
    "normalized_auc",
    "parse_detection_log",
    "parse_trajectory",
    "pose2_to_pose3",
    "project_se3_to_se2",
    "quat_from_axis_angle",
    "quat_from_yaw",
    "quat_multiply",
    "report_to_document",
    "rotation_distance",
    "rotation_mean",
    "run_benchmark",
    "save_attainment",
    "save_curve",
    "save_scenario_file",
    "save_trajectory",
    "to_task_units",
    "validate_document",
    "waypoint_accuracy",
    "waypoint_precision",
    "wrap_angle",
]
