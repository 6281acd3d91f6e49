"""Frame-wise evaluation of open-loop pose-estimate trajectories.

Multiple runs of the same sequence are associated frame-by-frame via
timestamps; precision is each run's deviation from the per-frame mean
pose, and accuracy (when ground truth exists) is the per-frame deviation
from the ground-truth pose, optionally after rigidly aligning each run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import AssociationError, TrajectoryFormatError
from .geometry import (
    Pose2,
    Pose3,
    RigidTransform3,
    align_trajectories,
    quat_from_yaw,
    quat_multiply,
    quat_to_matrix,
    rotation_distance,
    rotation_mean,
)


@dataclass(frozen=True)
class Trajectory:
    """Timestamped spatial poses, strictly increasing in time."""

    times: np.ndarray
    translations: np.ndarray
    quaternions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.translations, dtype=float).reshape(-1, 3)
        q = np.asarray(self.quaternions, dtype=float).reshape(-1, 4)
        if not (len(t) == len(p) == len(q)):
            raise TrajectoryFormatError(
                f"length mismatch: {len(t)} times, {len(p)} translations, {len(q)} quaternions"
            )
        if len(t) == 0:
            raise TrajectoryFormatError("empty trajectory")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
            raise TrajectoryFormatError("non-finite entries in trajectory")
        if np.any(np.diff(t) <= 0):
            bad = int(np.argmax(np.diff(t) <= 0)) + 1
            raise TrajectoryFormatError(
                f"timestamps must be strictly increasing (violated at row {bad}, "
                f"t={t[bad]!r} after t={t[bad - 1]!r})"
            )
        norms = np.linalg.norm(q, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-3):
            bad = int(np.argmax(np.abs(norms - 1.0) > 1e-3))
            raise TrajectoryFormatError(
                f"quaternion at row {bad} has norm {norms[bad]!r}, too far from 1"
            )
        q = q / norms[:, None]
        q[q[:, 3] < 0.0] *= -1.0
        for arr in (t, p, q):
            arr.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "translations", p)
        object.__setattr__(self, "quaternions", q)

    def __len__(self) -> int:
        return len(self.times)

    def pose(self, i: int) -> Pose3:
        return Pose3(self.translations[i], self.quaternions[i])

    @classmethod
    def from_poses(cls, times: Sequence[float], poses: Sequence[Pose3]) -> "Trajectory":
        return cls(
            np.asarray(times, dtype=float),
            np.array([p.translation for p in poses]),
            np.array([p.rotation for p in poses]),
        )

    @classmethod
    def from_planar(cls, times: Sequence[float], poses: Sequence[Pose2]) -> "Trajectory":
        return cls(
            np.asarray(times, dtype=float),
            np.array([[p.x, p.y, 0.0] for p in poses]),
            np.array([quat_from_yaw(p.theta) for p in poses]),
        )

    def transformed(self, T: RigidTransform3) -> "Trajectory":
        R = quat_to_matrix(T.rotation)
        new_q = np.array([quat_multiply(T.rotation, q) for q in self.quaternions])
        return Trajectory(self.times, self.translations @ R.T + T.translation, new_q)


def parse_trajectory(text: str, source: str = "<string>") -> Trajectory:
    """Parse whitespace-separated pose rows.

    Two layouts are auto-detected by column count: 8 columns
    ``t tx ty tz qx qy qz qw`` (scalar-last quaternion) or 4 columns
    ``t x y theta`` (planar, embedded at z=0).  Lines starting with ``#``
    are comments.
    """
    rows: List[List[float]] = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if width is None:
            width = len(fields)
            if width not in (4, 8):
                raise TrajectoryFormatError(
                    f"{source}:{lineno}: expected 4 or 8 columns, got {width}"
                )
        elif len(fields) != width:
            raise TrajectoryFormatError(
                f"{source}:{lineno}: expected {width} columns, got {len(fields)}"
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise TrajectoryFormatError(f"{source}:{lineno}: {exc}") from exc
    if not rows:
        raise TrajectoryFormatError(f"{source}: no data rows")
    data = np.array(rows)
    try:
        if width == 8:
            return Trajectory(data[:, 0], data[:, 1:4], data[:, 4:8])
        poses = [Pose2(x, y, theta) for x, y, theta in data[:, 1:4]]
        return Trajectory.from_planar(data[:, 0], poses)
    except (TrajectoryFormatError, ValueError) as exc:
        raise TrajectoryFormatError(f"{source}: {exc}") from exc


def load_trajectory(path: Union[str, Path]) -> Trajectory:
    path = Path(path)
    return parse_trajectory(path.read_text(), source=str(path))


def dump_trajectory(traj: Trajectory) -> str:
    lines = []
    for t, p, q in zip(traj.times, traj.translations, traj.quaternions):
        lines.append(
            " ".join(repr(float(v)) for v in (t, p[0], p[1], p[2], q[0], q[1], q[2], q[3]))
        )
    return "\n".join(lines) + "\n"


def save_trajectory(traj: Trajectory, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_trajectory(traj))


# ---------------------------------------------------------------------------
# association


def _nearest_within(base_times: np.ndarray, times: np.ndarray, tol: float) -> np.ndarray:
    """Index into ``times`` of the nearest neighbor of each base time, or -1
    when none lies within ``tol``.  Claims on the same index keep only the
    closest base frame."""
    pos = np.searchsorted(times, base_times)
    idx = np.full(len(base_times), -1, dtype=int)
    dist = np.full(len(base_times), np.inf)
    for cand in (np.clip(pos - 1, 0, len(times) - 1), np.clip(pos, 0, len(times) - 1)):
        d = np.abs(times[cand] - base_times)
        better = d < dist
        idx[better] = cand[better]
        dist[better] = d[better]
    idx[dist > tol] = -1
    # Injectivity: among base frames claiming one target frame, keep the
    # closest (ties go to the earlier base frame).
    best: dict[int, int] = {}
    for i, (j, d) in enumerate(zip(idx, dist)):
        if j < 0:
            continue
        if j not in best or d < dist[best[j]]:
            if j in best:
                idx[best[j]] = -1
            best[j] = i
        else:
            idx[i] = -1
    return idx


def associate_runs(
    base: Trajectory, runs: Sequence[Trajectory], assoc_tol: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Match every run against the base timeline.

    Returns (kept base indices, matrix of per-run indices aligned with
    them).  Only base frames matched by every run are kept.

    Raises
    ------
    AssociationError
        If no base frame is matched by all runs; the message names the
        first base timestamp that failed.
    """
    if assoc_tol <= 0:
        raise ValueError(f"assoc_tol must be positive, got {assoc_tol!r}")
    match = np.stack([_nearest_within(base.times, run.times, assoc_tol) for run in runs])
    keep = np.all(match >= 0, axis=0)
    if not np.any(keep):
        first = float(base.times[0])
        raise AssociationError(
            f"no frames shared by all {len(runs)} runs within {assoc_tol} s "
            f"(first unmatched base timestamp: {first!r})"
        )
    return np.flatnonzero(keep), match[:, keep]


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class FramewiseReport:
    """Per-frame and aggregate deviations for a group of runs.

    Accuracy fields are None when no ground truth was supplied.
    Aggregates are plain means over the associated frames.
    """

    times: np.ndarray
    n_runs: int
    position_precision_per_frame: np.ndarray
    rotation_precision_per_frame: np.ndarray
    position_accuracy_per_frame: Optional[np.ndarray]
    rotation_accuracy_per_frame: Optional[np.ndarray]
    aligned: bool

    @property
    def n_frames(self) -> int:
        return len(self.times)

    @property
    def position_precision(self) -> float:
        return float(np.mean(self.position_precision_per_frame))

    @property
    def rotation_precision(self) -> float:
        return float(np.mean(self.rotation_precision_per_frame))

    @property
    def position_accuracy(self) -> Optional[float]:
        if self.position_accuracy_per_frame is None:
            return None
        return float(np.mean(self.position_accuracy_per_frame))

    @property
    def rotation_accuracy(self) -> Optional[float]:
        if self.rotation_accuracy_per_frame is None:
            return None
        return float(np.mean(self.rotation_accuracy_per_frame))


def framewise_metrics(
    runs: Sequence[Trajectory],
    ground_truth: Optional[Trajectory] = None,
    assoc_tol: float = 0.02,
    align: bool = False,
) -> FramewiseReport:
    """Associate runs frame-by-frame and compute dispersion and error.

    The base timeline is the ground truth when given, else the first run.
    ``align=True`` rigidly aligns each run to the ground truth over the
    associated frames before measuring accuracy (and precision), exposing
    the error that remains after frame registration.
    """
    if len(runs) < 1:
        raise ValueError("framewise_metrics: need at least one run")
    base = ground_truth if ground_truth is not None else runs[0]
    kept, match = associate_runs(base, runs, assoc_tol)

    run_ts = [runs[r].translations[match[r]] for r in range(len(runs))]
    run_qs = [runs[r].quaternions[match[r]] for r in range(len(runs))]

    if align:
        if ground_truth is None:
            raise ValueError("align=True requires a ground-truth trajectory")
        gt_t = ground_truth.translations[kept]
        for r in range(len(runs)):
            T = align_trajectories(run_ts[r], gt_t)
            R = quat_to_matrix(T.rotation)
            run_ts[r] = run_ts[r] @ R.T + T.translation
            run_qs[r] = np.array([quat_multiply(T.rotation, q) for q in run_qs[r]])

    n_frames = len(kept)
    n_runs = len(runs)
    stack_t = np.stack(run_ts)  # (runs, frames, 3)

    mean_t = stack_t.mean(axis=0)
    pos_prec = np.mean(np.linalg.norm(stack_t - mean_t, axis=2), axis=0)

    rot_prec = np.empty(n_frames)
    for f in range(n_frames):
        frame_quats = [run_qs[r][f] for r in range(n_runs)]
        mean_q = rotation_mean(frame_quats)
        rot_prec[f] = math.fsum(rotation_distance(q, mean_q) for q in frame_quats) / n_runs

    pos_acc = rot_acc = None
    if ground_truth is not None:
        gt_t = ground_truth.translations[kept]
        gt_q = ground_truth.quaternions[kept]
        pos_acc = np.mean(np.linalg.norm(stack_t - gt_t, axis=2), axis=0)
        rot_acc = np.empty(n_frames)
        for f in range(n_frames):
            rot_acc[f] = (
                math.fsum(rotation_distance(run_qs[r][f], gt_q[f]) for r in range(n_runs))
                / n_runs
            )

    return FramewiseReport(
        times=base.times[kept],
        n_runs=n_runs,
        position_precision_per_frame=pos_prec,
        rotation_precision_per_frame=rot_prec,
        position_accuracy_per_frame=pos_acc,
        rotation_accuracy_per_frame=rot_acc,
        aligned=align,
    )
