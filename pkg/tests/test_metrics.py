"""Metric tests.

Hand-computed oracles (3-4-5 triangles, direct counts, closed-form areas)
are asserted first; hypothesis then checks the structural properties:
rigid invariance, permutation invariance, the sharp dispersion bound, and
exactness of the normalized area score against an independent integral.
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from navbench.errors import DegenerateMeanError, FrameMismatchError
from navbench.geometry import Pose2, angle_distance
from navbench.metrics import (
    cumulative_curve,
    completeness,
    distribution_summary,
    normalized_auc,
    to_task_units,
    waypoint_accuracy,
    waypoint_precision,
)
from navbench.task import AttainmentRecord, AttainmentTable, RobotProfile

P345 = [Pose2(0.3, 0.4, 0.1), Pose2(0.6, 0.8, -0.1)]


# ---------------------------------------------------------------------------
# accuracy


def test_accuracy_hand_oracle():
    acc = waypoint_accuracy(P345, Pose2(0, 0, 0))
    assert acc.position_m == pytest.approx(0.75, abs=1e-15)
    assert acc.orientation_rad == pytest.approx(0.1, abs=1e-15)


def test_accuracy_identity():
    ref = Pose2(1.0, -2.0, 0.7)
    acc = waypoint_accuracy([ref, ref, ref], ref)
    assert acc.position_m == 0.0
    assert acc.orientation_rad == 0.0


def test_accuracy_wrap_aware():
    recs = [Pose2(0, 0, 3.0), Pose2(0, 0, -3.0)]
    acc = waypoint_accuracy(recs, Pose2(0, 0, math.pi))
    assert acc.orientation_rad == pytest.approx(math.pi - 3.0, abs=1e-12)


def test_accuracy_empty_rejected():
    with pytest.raises(ValueError):
        waypoint_accuracy([], Pose2(0, 0, 0))


def test_accuracy_frame_checks():
    recs = [
        AttainmentRecord("s", "w", 1, Pose2(1, 0, 0), frame_id="wp:w"),
        AttainmentRecord("s", "w", 2, Pose2(0, 1, 0), frame_id="task"),
    ]
    with pytest.raises(FrameMismatchError):
        waypoint_accuracy(recs, Pose2(0, 0, 0))
    with pytest.raises(FrameMismatchError):
        waypoint_accuracy(recs[:1], Pose2(0, 0, 0), reference_frame="task")
    # Matching frames pass.
    acc = waypoint_accuracy(recs[:1], Pose2(0, 0, 0), reference_frame="wp:w")
    assert acc.position_m == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# precision


def test_precision_hand_oracle():
    prec = waypoint_precision(P345)
    assert prec.position_m == pytest.approx(0.25, abs=1e-15)
    assert prec.orientation_rad == pytest.approx(0.1, abs=1e-15)


def test_precision_single_and_identical():
    assert waypoint_precision([Pose2(3, 4, 1)]).position_m == 0.0
    prec = waypoint_precision([Pose2(3, 4, 1)] * 5)
    assert prec.position_m == pytest.approx(0.0, abs=1e-12)
    assert prec.orientation_rad == pytest.approx(0.0, abs=1e-12)


def test_precision_degenerate_headings():
    with pytest.raises(DegenerateMeanError):
        waypoint_precision([Pose2(0, 0, 0), Pose2(0, 0, math.pi)])


def test_precision_uses_circular_mean():
    # Headings straddling the wrap point: dispersion is 0.1, not ~pi.
    prec = waypoint_precision([Pose2(0, 0, 3.1), Pose2(0, 0, -3.1)])
    expected = angle_distance(3.1, math.pi)
    assert prec.orientation_rad == pytest.approx(expected, abs=1e-9)


# ---------------------------------------------------------------------------
# invariance properties

finite = st.floats(-30, 30, allow_nan=False, allow_infinity=False)


@st.composite
def pose_lists(draw, min_size=1):
    n = draw(st.integers(min_size, 8))
    poses = [Pose2(draw(finite), draw(finite), draw(finite)) for _ in range(n)]
    return poses


def _transform(g: Pose2, p: Pose2) -> Pose2:
    return g.compose(p)


@given(pose_lists(), st.builds(Pose2, finite, finite, finite))
def test_precision_rigid_invariance(poses, g):
    try:
        base = waypoint_precision(poses)
    except DegenerateMeanError:
        assume(False)
    moved = waypoint_precision([_transform(g, p) for p in poses])
    assert moved.position_m == pytest.approx(base.position_m, abs=1e-7)
    assert moved.orientation_rad == pytest.approx(base.orientation_rad, abs=1e-7)


@given(pose_lists(), st.builds(Pose2, finite, finite, finite), st.builds(Pose2, finite, finite, finite))
def test_accuracy_joint_rigid_invariance(poses, ref, g):
    base = waypoint_accuracy(poses, ref)
    moved = waypoint_accuracy([_transform(g, p) for p in poses], _transform(g, ref))
    assert moved.position_m == pytest.approx(base.position_m, abs=1e-7)
    assert moved.orientation_rad == pytest.approx(base.orientation_rad, abs=1e-7)


@given(pose_lists(), st.randoms(use_true_random=False))
def test_permutation_invariance(poses, rnd):
    shuffled = list(poses)
    rnd.shuffle(shuffled)
    ref = Pose2(1, 2, 0.3)
    a, b = waypoint_accuracy(poses, ref), waypoint_accuracy(shuffled, ref)
    assert a.position_m == pytest.approx(b.position_m, abs=1e-12)
    try:
        pa, pb = waypoint_precision(poses), waypoint_precision(shuffled)
    except DegenerateMeanError:
        assume(False)
    assert pa.position_m == pytest.approx(pb.position_m, abs=1e-12)
    assert pa.orientation_rad == pytest.approx(pb.orientation_rad, abs=1e-12)


@given(pose_lists(), st.builds(Pose2, finite, finite, finite))
def test_dispersion_sharp_lower_bound(poses, extra):
    # Adding any record can shrink the mean position dispersion by at most
    # the factor n/(n+1).  (An added point can pull the sample mean toward
    # a cluster, so "never decreases" would be false.)
    try:
        base = waypoint_precision(poses).position_m
        n = len(poses)
        grown = waypoint_precision(poses + [extra]).position_m
    except DegenerateMeanError:
        assume(False)
    assert grown >= n / (n + 1) * base - 1e-9


def test_dispersion_can_shrink_when_outlier_joins():
    # Regression guard for the bound above being sharp in spirit: a point
    # farther from the mean than any existing one can still reduce E.
    poses = [Pose2(-1, 0, 0), Pose2(1, 0, 0)]
    base = waypoint_precision(poses).position_m
    grown = waypoint_precision(poses + [Pose2(1.001, 0, 0)]).position_m
    assert grown < base


# ---------------------------------------------------------------------------
# completeness


def _table(success: dict, rounds: int, universe=None) -> AttainmentTable:
    table = AttainmentTable(rounds, universe)
    for (seq, wp), m in success.items():
        for j in range(1, m + 1):
            table.mark_attainment(
                AttainmentRecord(seq, wp, j, Pose2(float(j), 0, 0))
            )
    return table


def test_completeness_hand_oracle():
    success = {
        ("a", "w1"): 5,
        ("a", "w2"): 5,
        ("a", "w3"): 5,
        ("b", "w1"): 5,
        ("b", "w2"): 4,
    }
    result = completeness(_table(success, rounds=5))
    assert result.ratio == pytest.approx(0.8)
    assert result.completed == 4
    assert result.total == 5
    assert result.indicators[("b", "w2")] == 0


def test_completeness_all_and_none():
    assert completeness(_table({("a", "w"): 3}, rounds=3)).ratio == 1.0
    empty = AttainmentTable(3, universe=[("a", "w"), ("a", "v")])
    assert completeness(empty).ratio == 0.0
    with pytest.raises(ValueError):
        completeness(AttainmentTable(3))


def test_completeness_ignores_priming():
    table = _table({("a", "w"): 2}, rounds=3)
    table.mark_attainment(AttainmentRecord("a", "w", 0, Pose2(0, 0, 0)))
    assert completeness(table).ratio == 0.0


@given(
    st.integers(1, 5),
    st.dictionaries(
        st.tuples(st.sampled_from(["a", "b", "c"]), st.sampled_from(["u", "v", "w", "x"])),
        st.integers(0, 5),
        min_size=1,
        max_size=10,
    ),
)
def test_completeness_matches_brute_force(rounds, spec_counts):
    success = {cell: min(m, rounds) for cell, m in spec_counts.items()}
    table = _table(success, rounds, universe=list(success))
    result = completeness(table)
    # Independent double loop over the declared universe.
    total = 0
    done = 0
    for cell in success:
        total += 1
        recorded = {r.round_index for r in table.records(*cell)}
        if recorded == set(range(1, rounds + 1)):
            done += 1
    assert result.ratio == done / total
    assert result.completed == done


# ---------------------------------------------------------------------------
# task units


def test_task_units():
    profile = RobotProfile(0.30, 80.0)
    assert to_task_units(0.30, profile, "position") == pytest.approx(1.0)
    assert to_task_units(0.0, profile, "position") == 0.0
    assert to_task_units(math.radians(40.0), profile, "angle") == pytest.approx(0.5)
    with pytest.raises(ValueError):
        to_task_units(1.0, profile, "speed")


# ---------------------------------------------------------------------------
# cumulative curves


def test_curve_hand_oracle():
    curve = cumulative_curve([0.1, 0.2], 4, [0.15, 0.25])
    assert curve.fraction_below == (0.25, 0.5)
    assert curve.x_max == 0.25


def test_curve_strict_inequality():
    curve = cumulative_curve([0.1, 0.2], 4, [0.1, 0.2, 0.3])
    assert curve.fraction_below == (0.0, 0.25, 0.5)


def test_curve_all_zero_values():
    curve = cumulative_curve([0.0, 0.0, 0.0], 3, [0.01, 1.0])
    assert curve.fraction_below == (1.0, 1.0)


def test_curve_no_completed_waypoints():
    curve = cumulative_curve([], 5, [0.1, 0.2])
    assert curve.fraction_below == (0.0, 0.0)


def test_curve_validation():
    with pytest.raises(ValueError):
        cumulative_curve([0.1], 2, [])
    with pytest.raises(ValueError):
        cumulative_curve([0.1], 2, [0.2, 0.2])
    with pytest.raises(ValueError):
        cumulative_curve([0.1], 2, [0.3, 0.2])
    with pytest.raises(ValueError):
        cumulative_curve([0.1, 0.2, 0.3], 2, [0.5])
    with pytest.raises(ValueError):
        cumulative_curve([0.1], 0, [0.5])


@given(
    st.lists(st.floats(0, 1, allow_nan=False), min_size=0, max_size=10),
    st.integers(1, 15),
)
def test_curve_monotone_and_bounded(values, extra_slots):
    total = len(values) + extra_slots
    thresholds = np.linspace(0.01, 1.2, 25)
    curve = cumulative_curve(values, total, thresholds)
    fracs = curve.fraction_below
    assert all(b >= a for a, b in zip(fracs, fracs[1:]))
    assert fracs[-1] <= len(values) / total + 1e-12


# ---------------------------------------------------------------------------
# normalized area score


def test_nauc_constant_curves():
    ones = cumulative_curve([0.0] * 3, 3, [0.1, 0.5, 2.0])
    assert normalized_auc(ones) == pytest.approx(1.0, abs=1e-15)
    half = cumulative_curve([0.0], 2, [0.1, 0.5, 2.0])
    assert normalized_auc(half) == pytest.approx(0.5, abs=1e-15)


def test_nauc_staircase_oracle():
    # Geometric area of the two-step staircase over [0, 0.4]:
    # F=0 on (0,0.1], 0.5 on (0.1,0.2], 1.0 on (0.2,0.4] -> 0.25/0.4.
    curve = cumulative_curve([0.1, 0.2], 2, [0.05, 0.1, 0.15, 0.2, 0.3, 0.4])
    assert abs(normalized_auc(curve) - 0.625) <= 1e-12


def test_nauc_staircase_dense_thresholds():
    thresholds = [t for t in np.arange(0.0125, 0.4001, 0.0125)]
    curve = cumulative_curve([0.1, 0.2], 2, thresholds)
    assert normalized_auc(curve) == pytest.approx(0.625, abs=1e-9)


def _closed_form_nauc(values, total, x_max):
    # Integral of the fraction-below staircase has the closed form
    # sum(max(0, x_max - v)) / (total * x_max).
    return sum(max(0.0, x_max - v) for v in values) / (total * x_max)


@given(
    st.lists(st.floats(0.001, 0.999, allow_nan=False), min_size=0, max_size=8),
    st.integers(0, 6),
    st.lists(st.floats(0.001, 0.999, allow_nan=False), min_size=0, max_size=5),
)
def test_nauc_matches_closed_form(values, extra_slots, filler):
    # With thresholds covering every breakpoint, the staircase area equals
    # the closed form exactly (up to float addition order).
    total = len(values) + extra_slots
    assume(total >= 1)
    x_max = 1.0
    thresholds = sorted(set(values) | set(filler) | {x_max})
    curve = cumulative_curve(values, total, thresholds)
    expected = _closed_form_nauc(values, total, x_max)
    assert normalized_auc(curve) == pytest.approx(expected, abs=1e-12)


@given(
    st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=8),
    st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=8),
    st.integers(4, 10),
)
def test_nauc_monotone_in_domination(values_a, values_b, total):
    # Pointwise-lower values give a pointwise-higher curve, hence >= score.
    n = min(len(values_a), len(values_b))
    assume(n >= 1 and total >= n)
    a = [min(x, y) for x, y in zip(values_a, values_b)][:n]
    b = [max(x, y) for x, y in zip(values_a, values_b)][:n]
    thresholds = np.linspace(0.05, 1.1, 20)
    curve_a = cumulative_curve(a, total, thresholds)
    curve_b = cumulative_curve(b, total, thresholds)
    assert normalized_auc(curve_a) >= normalized_auc(curve_b) - 1e-12


def test_nauc_rejects_bad_range():
    from navbench.metrics import CumulativeCurve

    with pytest.raises(ValueError):
        normalized_auc(CumulativeCurve((0.0,), (1.0,), 0.0))


# ---------------------------------------------------------------------------
# distribution summaries


def test_summary_hand_oracle():
    s = distribution_summary([1, 2, 3, 4, 5])
    assert (s.mean, s.median, s.q1, s.q3) == (3.0, 3.0, 2.0, 4.0)
    assert (s.min, s.max, s.count) == (1.0, 5.0, 5)


def test_summary_singleton_and_pair():
    s = distribution_summary([7.5])
    assert (s.mean, s.q1, s.median, s.q3, s.min, s.max) == (7.5,) * 6
    s2 = distribution_summary([0, 10])
    assert s2.mean == 5.0 and s2.median == 5.0


def test_summary_empty_rejected():
    with pytest.raises(ValueError):
        distribution_summary([])


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=30))
def test_summary_ordering(values):
    s = distribution_summary(values)
    assert s.min <= s.q1 <= s.median <= s.q3 <= s.max
    assert s.min <= s.mean <= s.max
    assert s.count == len(values)


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=15))
def test_summary_median_matches_sort_oracle(values):
    s = distribution_summary(values)
    v = sorted(values)
    n = len(v)
    if n % 2:
        expected = v[n // 2]
    else:
        expected = 0.5 * (v[n // 2 - 1] + v[n // 2])
    assert s.median == pytest.approx(expected, abs=1e-12)
