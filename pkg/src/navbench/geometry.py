"""Planar and spatial pose algebra.

Conventions used throughout the toolkit:

* angles are radians, wrapped to ``(-pi, pi]`` with the wrap point at ``+pi``
* quaternions are scalar-last ``[x, y, z, w]``, unit norm, canonicalized to
  a non-negative scalar part
* heading of a spatial pose is the yaw of the body x-axis projected onto
  the world xy plane
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, DegenerateMeanError, DegenerateProjectionError

TWO_PI = 2.0 * math.pi

# Resultant norms below this are treated as undefined circular means.
RESULTANT_NORM_TOL = 1e-9
# Quaternions must be unit within this tolerance.
UNIT_NORM_TOL = 1e-9


def wrap_angle(raw: float) -> float:
    """Wrap an angle to ``(-pi, pi]``.

    Raises
    ------
    ValueError
        If ``raw`` is NaN or infinite.
    """
    raw = float(raw)
    if not math.isfinite(raw):
        raise ValueError(f"cannot wrap non-finite angle {raw!r}")
    wrapped = raw % TWO_PI  # in [0, 2*pi)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


def angle_distance(a: float, b: float) -> float:
    """Absolute separation of two angles on the circle, in ``[0, pi]``."""
    return abs(wrap_angle(a - b))


def circular_mean(angles: Iterable[float]) -> float:
    """Direction of the summed unit vectors, wrapped to ``(-pi, pi]``.

    Raises
    ------
    ValueError
        If ``angles`` is empty.
    DegenerateMeanError
        If the resultant vector norm is below ``RESULTANT_NORM_TOL``
        (e.g. two antipodal headings), in which case no mean direction
        is defined.
    """
    angles = list(angles)
    if not angles:
        raise ValueError("circular_mean of an empty collection")
    c = math.fsum(math.cos(a) for a in angles)
    s = math.fsum(math.sin(a) for a in angles)
    if math.hypot(c, s) <= RESULTANT_NORM_TOL:
        raise DegenerateMeanError(
            f"circular mean undefined: resultant norm {math.hypot(c, s):.3e} "
            f"for {len(angles)} angles"
        )
    return wrap_angle(math.atan2(s, c))


@dataclass(frozen=True)
class Pose2:
    """Planar pose ``(x, y, theta)``; theta is wrapped on construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        x = float(self.x)
        y = float(self.y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite position ({self.x!r}, {self.y!r})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls(0.0, 0.0, 0.0)

    def compose(self, other: "Pose2") -> "Pose2":
        """Group composition ``self . other`` (apply ``other`` in this frame)."""
        c = math.cos(self.theta)
        s = math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Pose2":
        c = math.cos(self.theta)
        s = math.sin(self.theta)
        return Pose2(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.theta)

    def relative_to(self, base: "Pose2") -> "Pose2":
        """Express this pose in the frame of ``base``: ``base^-1 . self``."""
        return base.inverse().compose(self)

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


def _check_unit_quat(q: np.ndarray, what: str) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    if not np.all(np.isfinite(q)):
        raise ValueError(f"{what}: non-finite quaternion {q!r}")
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"{what}: quaternion norm {norm!r} is not 1 within {UNIT_NORM_TOL}")
    return q


def _canonical_quat(q: np.ndarray) -> np.ndarray:
    q = q / np.linalg.norm(q)
    if q[3] < 0.0:
        q = -q
    q = np.ascontiguousarray(q)
    q.flags.writeable = False
    return q


def quat_from_yaw(theta: float) -> np.ndarray:
    """Quaternion for a rotation of ``theta`` about the world z-axis."""
    half = 0.5 * float(theta)
    return _canonical_quat(np.array([0.0, 0.0, math.sin(half), math.cos(half)]))


def quat_from_axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float).reshape(3)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("zero rotation axis")
    half = 0.5 * float(angle)
    xyz = axis / n * math.sin(half)
    return _canonical_quat(np.array([xyz[0], xyz[1], xyz[2], math.cos(half)]))


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product of scalar-last quaternions (rotation ``q1`` after ``q2``)."""
    x1, y1, z1, w1 = q1
    x2, y2, z2, w2 = q2
    return np.array(
        [
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    x, y, z, w = q
    return np.array([-x, -y, -z, w])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit scalar-last quaternion."""
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(R: np.ndarray) -> np.ndarray:
    """Unit quaternion of a rotation matrix (Shepperd's method)."""
    R = np.asarray(R, dtype=float).reshape(3, 3)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s, 0.25 * s]
        )
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s, (R[2, 1] - R[1, 2]) / s]
        )
    elif R[1, 1] >= R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s, (R[0, 2] - R[2, 0]) / s]
        )
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s, (R[1, 0] - R[0, 1]) / s]
        )
    return _canonical_quat(q)


@dataclass(frozen=True)
class Pose3:
    """Spatial pose: translation in meters plus a unit quaternion."""

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError(f"non-finite translation {t!r}")
        t.flags.writeable = False
        q = _check_unit_quat(self.rotation, "Pose3")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", _canonical_quat(q))

    @classmethod
    def identity(cls) -> "Pose3":
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_xyz_quat(cls, tx, ty, tz, qx, qy, qz, qw, normalize: bool = False) -> "Pose3":
        """Build from raw components; ``normalize=True`` tolerates the rounding
        of quaternions read back from text files."""
        q = np.array([qx, qy, qz, qw], dtype=float)
        if normalize:
            norm = float(np.linalg.norm(q))
            if not math.isfinite(norm) or abs(norm - 1.0) > 1e-3:
                raise ValueError(f"quaternion norm {norm!r} too far from 1 to normalize")
            q = q / norm
        return cls(np.array([tx, ty, tz], dtype=float), q)

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)


def pose2_to_pose3(p: Pose2, z: float = 0.0) -> Pose3:
    """Embed a planar pose in space (z offset, rotation about z only)."""
    return Pose3(np.array([p.x, p.y, float(z)]), quat_from_yaw(p.theta))


def project_se3_to_se2(p: Pose3) -> Pose2:
    """Project a spatial pose to the plane.

    x and y come from the translation; the heading is the yaw of the body
    x-axis, ``atan2(R21, R11)``.

    Raises
    ------
    DegenerateProjectionError
        If the body x-axis is (numerically) vertical and yaw is undefined.
    """
    R = p.rotation_matrix()
    c, s = R[0, 0], R[1, 0]
    if abs(c) + abs(s) <= 1e-9:
        raise DegenerateProjectionError(
            "yaw undefined: body x-axis is vertical (|R11| + |R21| <= 1e-9)"
        )
    return Pose2(p.translation[0], p.translation[1], wrap_angle(math.atan2(s, c)))


def rotation_distance(qa: np.ndarray, qb: np.ndarray) -> float:
    """Geodesic angle between two unit quaternions, in ``[0, pi]``.

    Computed as ``4 * atan2(||qa - qb||, ||qa + qb||)`` after sign
    alignment, which stays accurate where the acos form degrades (near 0
    and near pi).
    """
    qa = _check_unit_quat(qa, "rotation_distance qa")
    qb = _check_unit_quat(qb, "rotation_distance qb")
    if float(np.dot(qa, qb)) < 0.0:
        qb = -qb
    return 4.0 * math.atan2(float(np.linalg.norm(qa - qb)), float(np.linalg.norm(qa + qb)))


def rotation_mean(rotations: Sequence[np.ndarray]) -> np.ndarray:
    """Chordal mean rotation: the principal eigenvector of the accumulated
    outer products (sign-invariant, so no alignment pass is needed).

    Raises ``ValueError`` on an empty input.
    """
    if len(rotations) == 0:
        raise ValueError("rotation_mean of an empty collection")
    M = np.zeros((4, 4))
    for q in rotations:
        q = _check_unit_quat(q, "rotation_mean")
        M += np.outer(q, q)
    _, vecs = np.linalg.eigh(M)
    return _canonical_quat(vecs[:, -1])


@dataclass(frozen=True)
class RigidTransform3:
    """Proper rigid transform of space: ``p -> R p + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = _check_unit_quat(self.rotation, "RigidTransform3")
        t = np.asarray(self.translation, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError(f"non-finite translation {t!r}")
        t.flags.writeable = False
        object.__setattr__(self, "rotation", _canonical_quat(q))
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform3":
        return cls(np.array([0.0, 0.0, 0.0, 1.0]), np.zeros(3))

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = quat_to_matrix(self.rotation)
        T[:3, 3] = self.translation
        return T

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        R = quat_to_matrix(self.rotation)
        return points @ R.T + self.translation

    def apply_pose(self, p: Pose3) -> Pose3:
        R = quat_to_matrix(self.rotation)
        return Pose3(R @ p.translation + self.translation, quat_multiply(self.rotation, p.rotation))

    def compose(self, other: "RigidTransform3") -> "RigidTransform3":
        R = quat_to_matrix(self.rotation)
        return RigidTransform3(
            quat_multiply(self.rotation, other.rotation),
            R @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform3":
        R = quat_to_matrix(self.rotation)
        return RigidTransform3(quat_conjugate(self.rotation), -(R.T @ self.translation))


def _as_points(poses, what: str) -> np.ndarray:
    if len(poses) > 0 and isinstance(poses[0], Pose3):
        pts = np.array([p.translation for p in poses], dtype=float)
    else:
        pts = np.asarray(poses, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise AlignmentError(f"{what}: expected (N, 3) points, got shape {pts.shape}")
    return pts


def _check_not_collinear(pts: np.ndarray, what: str) -> None:
    centered = pts - pts.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[1] <= 1e-9 * max(svals[0], 1.0):
        raise AlignmentError(f"{what}: degenerate (collinear or coincident) point set")


def align_trajectories(source, target) -> RigidTransform3:
    """Least-squares rigid transform (rotation + translation, no scale)
    minimizing ``sum ||T . source_i - target_i||^2``.

    Accepts sequences of :class:`Pose3` or ``(N, 3)`` position arrays; only
    positions enter the fit.

    Raises
    ------
    AlignmentError
        On length mismatch, fewer than 3 correspondences, or collinear
        point sets.
    """
    src = _as_points(source, "source")
    dst = _as_points(target, "target")
    if len(src) != len(dst):
        raise AlignmentError(f"length mismatch: {len(src)} source vs {len(dst)} target poses")
    if len(src) < 3:
        raise AlignmentError(f"need at least 3 correspondences, got {len(src)}")
    _check_not_collinear(src, "source")
    _check_not_collinear(dst, "target")

    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    H = (src - src_mean).T @ (dst - dst_mean)
    U, _, Vt = np.linalg.svd(H)
    V = Vt.T
    # Reflection guard keeps det(R) = +1.
    S = np.diag([1.0, 1.0, float(np.sign(np.linalg.det(V @ U.T)))])
    R = V @ S @ U.T
    t = dst_mean - R @ src_mean
    return RigidTransform3(quat_from_matrix(R), t)


def alignment_residual(transform: RigidTransform3, source, target) -> float:
    """Root-mean-square residual of an alignment."""
    src = _as_points(source, "source")
    dst = _as_points(target, "target")
    diff = transform.apply_points(src) - dst
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
