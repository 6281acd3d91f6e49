"""Deterministic closed-loop 2D navigation simulator.

A kinematic unicycle robot tours the scenario's waypoints.  The control
loop closes on a pluggable localizer's *estimate*, so localization error
decides where the robot actually stops, while records always store the
*true* pose.  That split reproduces the precision / accuracy /
completeness phenomenology of map-based navigation at desk scale:

* a spatially correlated map bias makes stops repeatable but offset
  (precision beats accuracy),
* bounded correction residuals set the repeatability floor,
* random correction divergence produces incomplete waypoints,
* map reuse shrinks residuals and divergence rates.

All randomness flows through counter-based generators keyed by
(seed, sequence, round, waypoint), so results are identical regardless
of execution order or thread count.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence as SequenceT, Tuple

import numpy as np

from .errors import ScenarioError
from .geometry import Pose2, wrap_angle
from .ingest import ScheduleEntry
from .task import (
    AttainmentRecord,
    AttainmentTable,
    Mode,
    Scenario,
    Sequence,
    TASK_FRAME,
    Waypoint,
)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RobotState:
    """Ground-truth pose, the localizer's belief, and the sim clock."""

    true_pose: Pose2
    estimated_pose: Pose2
    time: float = 0.0


class LocalizerKind(enum.Enum):
    PERFECT = "perfect"
    DRIFTING_ODOMETRY = "drifting_odometry"
    MAP_CORRECTED = "map_corrected"


@dataclass(frozen=True)
class LocalizerSpec:
    """Parametric localizer model.

    ``sigma_v`` / ``sigma_omega`` are odometry noise densities (per
    sqrt-second, so statistics are step-size invariant).  ``rho`` bounds
    the map-correction residual, ``bias_pos_max`` / ``bias_ang_max``
    bound the per-cell map bias, and ``p_fail`` is the divergence
    probability per correction.  ``map_reuse`` halves ``rho`` and
    quarters ``p_fail``, modeling relocalization in an established map.
    """

    kind: LocalizerKind = LocalizerKind.PERFECT
    sigma_v: float = 0.0
    sigma_omega: float = 0.0
    rho: float = 0.0
    bias_pos_max: float = 0.0
    bias_ang_max: float = 0.0
    bias_seed: int = 0
    bias_cell_m: float = 1.0
    p_fail: float = 0.0
    map_reuse: bool = False
    constant_bias: Optional[Pose2] = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", LocalizerKind(self.kind))
        for name in ("sigma_v", "sigma_omega", "rho", "bias_pos_max", "bias_ang_max"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not (0.0 <= self.p_fail <= 1.0):
            raise ScenarioError(f"p_fail must be in [0, 1], got {self.p_fail!r}")
        if self.bias_cell_m <= 0:
            raise ScenarioError(f"bias_cell_m must be positive, got {self.bias_cell_m!r}")

    def effective_rho(self, map_active: bool) -> float:
        return self.rho * 0.5 if (self.map_reuse or map_active) else self.rho

    def effective_p_fail(self, map_active: bool) -> float:
        return self.p_fail * 0.25 if (self.map_reuse or map_active) else self.p_fail


# ---------------------------------------------------------------------------
# deterministic bias field


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _unit_float(h: int) -> float:
    return (h >> 11) * 2.0 ** -53


def bias_at(spec: LocalizerSpec, x: float, y: float) -> Pose2:
    """Deterministic map bias for the grid cell containing (x, y).

    The same cell always yields the same bias for a given seed: map error
    is spatially correlated, which is what makes repeated arrivals land
    in the same (wrong) place.
    """
    if spec.constant_bias is not None:
        return spec.constant_bias
    cx = math.floor(x / spec.bias_cell_m)
    cy = math.floor(y / spec.bias_cell_m)
    h = _splitmix64((spec.bias_seed & _MASK64) ^ 0xA076_1D64_78BD_642F)
    h = _splitmix64(h ^ (cx & _MASK64))
    h = _splitmix64(h ^ (cy & _MASK64))
    u1 = _unit_float(h)
    h = _splitmix64(h)
    u2 = _unit_float(h)
    h = _splitmix64(h)
    u3 = _unit_float(h)
    return Pose2(
        (2.0 * u1 - 1.0) * spec.bias_pos_max,
        (2.0 * u2 - 1.0) * spec.bias_pos_max,
        (2.0 * u3 - 1.0) * spec.bias_ang_max,
    )


# ---------------------------------------------------------------------------
# localizers


class Localizer:
    """Stateful pose estimator driven by the simulation loop."""

    diverged: bool = False

    def reset(self, pose: Pose2) -> None:
        """Re-initialize the belief at a known pose (teleport / rescue)."""
        self.diverged = False

    def relocalize(self, pose: Pose2) -> None:
        """Round-boundary rescue: clear divergence, keep map state."""
        self.diverged = False

    def update(
        self, prev_true: Pose2, new_true: Pose2, rng: np.random.Generator, dt: float
    ) -> Pose2:
        raise NotImplementedError


class PerfectLocalizer(Localizer):
    def update(self, prev_true, new_true, rng, dt):
        return new_true


class DriftingOdometryLocalizer(Localizer):
    """Integrates the true incremental motion plus zero-mean noise: an
    unbounded random walk away from the truth."""

    def __init__(self, spec: LocalizerSpec):
        self.spec = spec
        self.estimate = Pose2.identity()

    def reset(self, pose: Pose2) -> None:
        super().reset(pose)
        self.estimate = pose

    def update(self, prev_true, new_true, rng, dt):
        delta = prev_true.inverse().compose(new_true)
        sail = math.sqrt(dt)
        if self.spec.sigma_v > 0.0 or self.spec.sigma_omega > 0.0:
            n = rng.standard_normal(3)
            delta = Pose2(
                delta.x + self.spec.sigma_v * sail * n[0],
                delta.y + self.spec.sigma_v * sail * n[1],
                delta.theta + self.spec.sigma_omega * sail * n[2],
            )
        self.estimate = self.estimate.compose(delta)
        return self.estimate


class MapCorrectedLocalizer(Localizer):
    """Corrects against a map every step: the estimate is the truth plus
    the cell's bias plus a residual bounded by the effective rho.  Each
    correction carries a small divergence probability."""

    def __init__(self, spec: LocalizerSpec):
        self.spec = spec
        self.map_active = False

    def update(self, prev_true, new_true, rng, dt):
        p_fail = self.spec.effective_p_fail(self.map_active)
        rho = self.spec.effective_rho(self.map_active)
        u = rng.random(4)
        if p_fail > 0.0 and u[0] < p_fail:
            self.diverged = True
        bias = bias_at(self.spec, new_true.x, new_true.y)
        if rho > 0.0:
            r = rho * math.sqrt(u[1])
            phi = 2.0 * math.pi * u[2]
            res_x, res_y = r * math.cos(phi), r * math.sin(phi)
            res_t = (2.0 * u[3] - 1.0) * rho
        else:
            res_x = res_y = res_t = 0.0
        return Pose2(
            new_true.x + bias.x + res_x,
            new_true.y + bias.y + res_y,
            new_true.theta + bias.theta + res_t,
        )


def make_localizer(spec: LocalizerSpec) -> Localizer:
    if spec.kind is LocalizerKind.PERFECT:
        return PerfectLocalizer()
    if spec.kind is LocalizerKind.DRIFTING_ODOMETRY:
        return DriftingOdometryLocalizer(spec)
    if spec.kind is LocalizerKind.MAP_CORRECTED:
        return MapCorrectedLocalizer(spec)
    raise ScenarioError(f"unknown localizer kind {spec.kind!r}")


def localize(
    spec: LocalizerSpec,
    localizer: Localizer,
    prev_true: Pose2,
    new_true: Pose2,
    rng: np.random.Generator,
    dt: float,
) -> Pose2:
    """One correction step; thin functional wrapper over the localizer
    object for callers that do not run the full loop."""
    return localizer.update(prev_true, new_true, rng, dt)


# ---------------------------------------------------------------------------
# kinematics


def advance_pose(pose: Pose2, v: float, omega: float, dt: float) -> Pose2:
    """Unicycle update; exact arc integration once the turn over the step
    is non-negligible."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if abs(omega) * dt > 1e-6:
        radius = v / omega
        theta_new = pose.theta + omega * dt
        return Pose2(
            pose.x + radius * (math.sin(theta_new) - math.sin(pose.theta)),
            pose.y - radius * (math.cos(theta_new) - math.cos(pose.theta)),
            theta_new,
        )
    return Pose2(
        pose.x + v * math.cos(pose.theta) * dt,
        pose.y + v * math.sin(pose.theta) * dt,
        pose.theta + omega * dt,
    )


def step_kinematics(state: RobotState, v: float, omega: float, dt: float) -> RobotState:
    """Advance the true pose; the estimate is the localizer's business."""
    return RobotState(advance_pose(state.true_pose, v, omega, dt), state.estimated_pose, state.time + dt)


# ---------------------------------------------------------------------------
# controller


@dataclass(frozen=True)
class ControllerGains:
    """Rotate-drive-rotate proportional law: turn toward the goal, drive
    with speed proportional to distance, then settle the heading.

    The heading settle phase begins once the estimate is inside half the
    arrival radius, not at the radius itself; with a noisy estimate the
    boundary would otherwise flap between driving and settling and the
    robot could orbit the goal forever.  v_min keeps the approach from
    stalling asymptotically outside that inner region.
    """

    k_rho: float = 0.8
    k_alpha: float = 1.5
    k_theta: float = 1.0
    v_max: float = 0.6
    v_min: float = 0.05
    omega_max: float = 1.8
    alpha_gate: float = 0.5
    settle_frac: float = 0.5

    def __post_init__(self):
        for name in ("k_rho", "k_alpha", "k_theta", "v_max", "v_min", "omega_max", "alpha_gate"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.settle_frac <= 1:
            raise ScenarioError(f"settle_frac must be in (0, 1], got {self.settle_frac!r}")
        if self.v_min > self.v_max:
            raise ScenarioError("v_min must not exceed v_max")


def _clamp(value: float, limit: float) -> float:
    return max(-limit, min(limit, value))


def control_command(
    gains: ControllerGains,
    estimate: Pose2,
    target: Pose2,
    pos_tol: float,
    settling: Optional[bool] = None,
) -> Tuple[float, float]:
    """(v, omega) steering the *estimated* pose toward the target.

    ``settling`` tells the law it is already in the heading-settle phase;
    stateful callers latch it (see goto_waypoint) so estimate noise at the
    phase boundary cannot flip the law back and forth.  Passing None keeps
    the stateless behavior of entering the settle phase inside
    settle_frac * pos_tol.
    """
    dx = target.x - estimate.x
    dy = target.y - estimate.y
    rho = math.hypot(dx, dy)
    if settling is None:
        settling = rho < gains.settle_frac * pos_tol
    if not settling:
        alpha = wrap_angle(math.atan2(dy, dx) - estimate.theta)
        omega = _clamp(gains.k_alpha * alpha, gains.omega_max)
        if abs(alpha) > gains.alpha_gate:
            return 0.0, omega
        return min(max(gains.k_rho * rho, gains.v_min), gains.v_max), omega
    heading_err = wrap_angle(target.theta - estimate.theta)
    return 0.0, _clamp(gains.k_theta * heading_err, gains.omega_max)


class Outcome(enum.Enum):
    ARRIVED = "arrived"
    TIMEOUT = "timeout"
    DIVERGED = "diverged"
    SKIPPED = "skipped"


@dataclass
class TraceLog:
    """Step-by-step true and estimated poses for one simulation run."""

    times: List[float] = field(default_factory=list)
    true_poses: List[Pose2] = field(default_factory=list)
    estimated_poses: List[Pose2] = field(default_factory=list)

    def append(self, state: RobotState) -> None:
        self.times.append(state.time)
        self.true_poses.append(state.true_pose)
        self.estimated_poses.append(state.estimated_pose)


@dataclass(frozen=True)
class SimRunConfig:
    scenario: Scenario
    localizer: LocalizerSpec = LocalizerSpec()
    seed: int = 0
    dt: float = 0.05
    gains: ControllerGains = ControllerGains()
    mode: Optional[Mode] = None
    log_trajectories: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ScenarioError(f"dt must be positive, got {self.dt!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ScenarioError(f"seed must be a non-negative integer, got {self.seed!r}")

    @property
    def effective_mode(self) -> Mode:
        return self.mode if self.mode is not None else self.scenario.protocol.mode


def _leg_rng(seed: int, seq_index: int, round_index: int, wp_index: int) -> np.random.Generator:
    context = (seq_index << 40) | (round_index << 20) | wp_index
    key = np.array([seed & _MASK64, context & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def goto_waypoint(
    config: SimRunConfig,
    state: RobotState,
    target: Waypoint,
    localizer: Localizer,
    rng: np.random.Generator,
    trace: Optional[TraceLog] = None,
) -> Tuple[Outcome, RobotState]:
    """Drive until the *estimate* satisfies the arrival test, then stop.

    The caller records the *true* pose of the returned state.  Arrived is
    never reported while the estimated errors exceed the tolerances.
    """
    protocol = config.scenario.protocol
    pos_tol = protocol.arrival_pos_tol_m
    ang_tol = protocol.arrival_ang_tol_rad
    steps = max(1, int(math.ceil(protocol.timeout_s / config.dt)))
    settling = False
    for _ in range(steps):
        if localizer.diverged:
            return Outcome.DIVERGED, state
        est = state.estimated_pose
        dist = math.hypot(target.pose.x - est.x, target.pose.y - est.y)
        if dist < pos_tol and abs(wrap_angle(target.pose.theta - est.theta)) < ang_tol:
            return Outcome.ARRIVED, state
        if settling:
            settling = dist < pos_tol
        else:
            settling = dist < config.gains.settle_frac * pos_tol
        v, omega = control_command(config.gains, est, target.pose, pos_tol, settling)
        new_true = advance_pose(state.true_pose, v, omega, config.dt)
        estimate = localizer.update(state.true_pose, new_true, rng, config.dt)
        state = RobotState(new_true, estimate, state.time + config.dt)
        if trace is not None:
            trace.append(state)
    return Outcome.TIMEOUT, state


@dataclass
class SimResult:
    """Everything one simulated benchmark produces."""

    table: AttainmentTable
    outcomes: Dict[Tuple[str, str, int], Outcome]
    schedule: List[ScheduleEntry]
    trace: Optional[TraceLog]
    config: SimRunConfig


def run_benchmark(config: SimRunConfig) -> SimResult:
    """Execute the scenario's full protocol with one localizer.

    Fresh-map mode teleports the robot to the start and resets the
    localizer before every round.  Map mode runs one priming round
    (records stored as round 0, excluded from metrics) and then keeps
    both pose and localizer state across rounds; a round boundary only
    clears divergence (the operator rescue that accompanies
    re-localization in an existing map).  A failed waypoint skips the
    rest of its round.
    """
    scenario = config.scenario
    protocol = scenario.protocol
    mode = config.effective_mode
    table = AttainmentTable.for_scenario(scenario)
    outcomes: Dict[Tuple[str, str, int], Outcome] = {}
    schedule: List[ScheduleEntry] = []
    trace = TraceLog() if config.log_trajectories else None

    localizer = make_localizer(config.localizer)
    time = 0.0

    for seq_index, sequence in enumerate(scenario.sequences):
        rounds = list(range(1, protocol.rounds + 1))
        if mode is Mode.WITH_MAP:
            rounds = [0] + rounds

        state = RobotState(sequence.start_pose, sequence.start_pose, time)
        localizer.reset(sequence.start_pose)

        for round_index in rounds:
            if mode is Mode.WITHOUT_MAP:
                state = RobotState(sequence.start_pose, sequence.start_pose, state.time)
                localizer.reset(sequence.start_pose)
            else:
                localizer.relocalize(state.true_pose)
                if isinstance(localizer, MapCorrectedLocalizer):
                    localizer.map_active = round_index >= 1

            round_failed = False
            for wp_index, waypoint in enumerate(sequence.waypoints):
                key = (sequence.id, waypoint.id, round_index)
                if round_failed:
                    outcomes[key] = Outcome.SKIPPED
                    continue
                rng = _leg_rng(config.seed, seq_index, round_index, wp_index)
                outcome, state = goto_waypoint(
                    config, state, waypoint, localizer, rng, trace
                )
                outcomes[key] = outcome
                if outcome is Outcome.ARRIVED:
                    table.mark_attainment(
                        AttainmentRecord(
                            sequence_id=sequence.id,
                            waypoint_id=waypoint.id,
                            round_index=round_index,
                            measured_pose=state.true_pose,
                            frame_id=TASK_FRAME,
                            timestamp=state.time,
                        )
                    )
                    schedule.append(
                        ScheduleEntry(
                            sequence.id,
                            waypoint.id,
                            round_index,
                            state.time,
                            state.time + protocol.pause_s,
                        )
                    )
                    # The dwell advances the clock; a kinematic robot does
                    # not move while paused.
                    state = RobotState(
                        state.true_pose, state.estimated_pose, state.time + protocol.pause_s
                    )
                else:
                    round_failed = True
        time = state.time

    return SimResult(table, outcomes, schedule, trace, config)


# ---------------------------------------------------------------------------
# optional occupancy-grid validation


@dataclass(frozen=True)
class OccupancyGrid:
    """Boolean wall map; True cells are occupied."""

    occupied: np.ndarray
    resolution_m: float = 0.1
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        occ = np.asarray(self.occupied, dtype=bool)
        if occ.ndim != 2:
            raise ScenarioError(f"occupancy grid must be 2-D, got shape {occ.shape}")
        if self.resolution_m <= 0:
            raise ScenarioError("grid resolution must be positive")
        occ = occ.copy()
        occ.flags.writeable = False
        object.__setattr__(self, "occupied", occ)

    @classmethod
    def from_ascii(cls, rows: SequenceT[str], resolution_m: float = 0.1, origin_x: float = 0.0, origin_y: float = 0.0) -> "OccupancyGrid":
        """Rows of ``#`` (wall) and ``.`` (free); row 0 is the top."""
        height = len(rows)
        grid = np.zeros((height, len(rows[0]) if rows else 0), dtype=bool)
        for r, row in enumerate(rows):
            for c, ch in enumerate(row):
                grid[height - 1 - r, c] = ch == "#"
        return cls(grid, resolution_m, origin_x, origin_y)

    def is_occupied(self, x: float, y: float) -> bool:
        col = int(math.floor((x - self.origin_x) / self.resolution_m))
        row = int(math.floor((y - self.origin_y) / self.resolution_m))
        if 0 <= row < self.occupied.shape[0] and 0 <= col < self.occupied.shape[1]:
            return bool(self.occupied[row, col])
        return True  # outside the mapped area counts as blocked


def check_scenario_against_grid(scenario: Scenario, grid: OccupancyGrid) -> None:
    """Reject scenarios whose straight-line legs cross occupied cells.

    Raises :class:`ScenarioError` naming the first blocked leg.
    """
    step = 0.25 * grid.resolution_m
    for sequence in scenario.sequences:
        legs = []
        prev = sequence.start_pose
        prev_name = "start"
        for wp in sequence.waypoints:
            legs.append((prev_name, prev, wp.id, wp.pose))
            prev, prev_name = wp.pose, wp.id
        for from_name, a, to_name, b in legs:
            length = math.hypot(b.x - a.x, b.y - a.y)
            n = max(2, int(math.ceil(length / step)) + 1)
            for i in range(n):
                t = i / (n - 1)
                x = a.x + t * (b.x - a.x)
                y = a.y + t * (b.y - a.y)
                if grid.is_occupied(x, y):
                    raise ScenarioError(
                        f"sequence {sequence.id!r}: leg {from_name!r} -> {to_name!r} "
                        f"crosses a wall near ({x:.2f}, {y:.2f})"
                    )
