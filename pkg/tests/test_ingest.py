"""Measurement ingestion tests: parsing, clustering, association, and the
end-to-end synthesis oracle with injected clock skew."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from navbench.errors import (
    AssociationAmbiguityError,
    DetectionLogError,
    FrameMismatchError,
    InputFormatError,
)
from navbench.geometry import Pose2, Pose3, quat_from_yaw
from navbench.ingest import (
    Detection,
    ScheduleEntry,
    Visit,
    associate_visits,
    cluster_visits,
    detections_by_station,
    dump_schedule,
    ingest,
    load_schedule,
    load_station_map,
    local_frame_records,
    parse_detection_log,
)
from navbench.metrics import completeness, waypoint_precision
from navbench.task import AttainmentRecord, AttainmentTable


def det(t, station="cam0", visible=True, x=0.0, y=0.0, yaw=0.0):
    return Detection(t, station, Pose3(np.array([x, y, 0.3]), quat_from_yaw(yaw)), visible)


def det_line(t, station="cam0", visible=1, x=0.0, y=0.0):
    return f"{t} {station} {visible} {x} {y} 0.3 0 0 0 1"


# ---------------------------------------------------------------------------
# log parsing


def test_parse_empty_log():
    assert parse_detection_log("") == []
    assert parse_detection_log("# header only\n\n") == []


def test_parse_sorts_by_time():
    text = "\n".join([det_line(5.0), det_line(1.0, station="cam1"), det_line(3.0)])
    dets = parse_detection_log(text)
    assert [d.timestamp for d in dets] == [1.0, 3.0, 5.0]
    assert dets[0].station_id == "cam1"


def test_parse_field_errors():
    with pytest.raises(DetectionLogError, match=":1"):
        parse_detection_log("1.0 cam0 1 0 0 0\n")
    with pytest.raises(DetectionLogError, match=":2"):
        parse_detection_log(det_line(1.0) + "\nnan cam0 1 0 0 0 0 0 0 1\n")
    with pytest.raises(DetectionLogError, match="visibility"):
        parse_detection_log("1.0 cam0 maybe 0 0 0 0 0 0 1\n")
    with pytest.raises(DetectionLogError, match="norm"):
        parse_detection_log("1.0 cam0 1 0 0 0 0 0 0 9\n")


def test_parse_accepts_bool_spellings():
    text = "1.0 cam0 true 0 0 0 0 0 0 1\n2.0 cam0 FALSE 0 0 0 0 0 0 1\n"
    dets = parse_detection_log(text)
    assert [d.fully_visible for d in dets] == [True, False]


def test_grouping_by_station():
    dets = [det(2.0, "b"), det(1.0, "a"), det(3.0, "a")]
    grouped = detections_by_station(dets)
    assert [d.timestamp for d in grouped["a"]] == [1.0, 3.0]
    assert len(grouped["b"]) == 1


# ---------------------------------------------------------------------------
# clustering


def test_cluster_hand_oracle():
    times = [10.0, 10.5, 11.0, 30.0, 30.6, 31.2]
    visits = cluster_visits([det(t) for t in times], gap_max=5.0, dwell_min=0.8)
    assert len(visits) == 2
    assert (visits[0].t_start, visits[0].t_end) == (10.0, 11.0)
    assert (visits[1].t_start, visits[1].t_end) == (30.0, 31.2)
    assert visits[0].detection_count == 3


def test_cluster_single_detection_zero_dwell():
    visits = cluster_visits([det(7.0)], gap_max=5.0, dwell_min=0.0)
    assert len(visits) == 1
    assert visits[0].t_start == visits[0].t_end == 7.0


def test_cluster_sparse_detections_filtered():
    dets = [det(t) for t in (0.0, 6.0, 12.0, 18.0)]
    assert cluster_visits(dets, gap_max=5.0, dwell_min=2.0) == []


def test_cluster_median_representative():
    dets = [
        det(0.0, x=9.0, visible=True),
        det(1.0, x=1.5, y=2.5, yaw=0.3, visible=False),
        det(2.0, x=-9.0, visible=True),
    ]
    (visit,) = cluster_visits(dets, gap_max=5.0, dwell_min=0.5)
    assert visit.representative_pose.x == pytest.approx(1.5)
    assert visit.representative_pose.y == pytest.approx(2.5)
    assert visit.representative_pose.theta == pytest.approx(0.3, abs=1e-12)
    assert visit.fully_visible is False


def test_cluster_input_validation():
    with pytest.raises(ValueError, match="sorted"):
        cluster_visits([det(2.0), det(1.0)])
    with pytest.raises(ValueError, match="single station"):
        cluster_visits([det(1.0, "a"), det(2.0, "b")])
    with pytest.raises(ValueError):
        cluster_visits([det(1.0)], gap_max=-1)
    assert cluster_visits([]) == []


@given(
    st.lists(st.floats(0, 500, allow_nan=False), min_size=1, max_size=30),
    st.floats(-1000, 1000, allow_nan=False),
)
def test_cluster_time_shift_equivariance(times, shift):
    times = sorted(times)
    base = cluster_visits([det(t) for t in times], gap_max=4.0, dwell_min=1.0)
    moved = cluster_visits([det(t + shift) for t in times], gap_max=4.0, dwell_min=1.0)
    assert len(base) == len(moved)
    for a, b in zip(base, moved):
        assert b.t_start == pytest.approx(a.t_start + shift, abs=1e-6)
        assert b.t_end == pytest.approx(a.t_end + shift, abs=1e-6)
        assert b.detection_count == a.detection_count
        assert b.representative_pose == a.representative_pose


# ---------------------------------------------------------------------------
# schedule and station map files


def test_schedule_roundtrip():
    entries = [
        ScheduleEntry("s", "w1", 1, 10.0, 15.0),
        ScheduleEntry("s", "w2", 1, 30.0, 35.0),
    ]
    assert load_schedule(dump_schedule(entries)) == entries


def test_schedule_errors():
    with pytest.raises(InputFormatError, match=":1"):
        load_schedule("s w1 1 10\n")
    with pytest.raises(InputFormatError, match=":1"):
        load_schedule("s w1 one 10 15\n")
    with pytest.raises(InputFormatError, match="inverted"):
        load_schedule("s w1 1 20 10\n")


def test_station_map_parse_and_injectivity():
    mapping = load_station_map("cam0 w1\ncam1 w2\n")
    assert mapping == {"cam0": "w1", "cam1": "w2"}
    with pytest.raises(InputFormatError, match="mapped twice"):
        load_station_map("cam0 w1\ncam0 w2\n")
    with pytest.raises(InputFormatError, match="already observed"):
        load_station_map("cam0 w1\ncam1 w1\n")
    with pytest.raises(InputFormatError, match="2 fields"):
        load_station_map("cam0\n")


# ---------------------------------------------------------------------------
# association


def visit(mid, station="cam0", width=4.0, visible=True, pose=Pose2(0, 0, 0)):
    return Visit(station, mid - width / 2, mid + width / 2, pose, 5, visible)


SCHEDULE = [
    ScheduleEntry("s", "w1", 1, 100.0, 105.0),
    ScheduleEntry("s", "w1", 2, 200.0, 205.0),
    ScheduleEntry("s", "w2", 1, 130.0, 135.0),
    ScheduleEntry("s", "w2", 2, 230.0, 235.0),
]
STATIONS = {"cam0": "w1", "cam1": "w2"}


def test_associate_window_containment():
    result = associate_visits({"cam0": [visit(100.4)]}, SCHEDULE, STATIONS, skew_tol=1.0)
    assert len(result.matched) == 1
    entry, _ = result.matched[0]
    assert (entry.waypoint_id, entry.round_index) == ("w1", 1)
    assert result.table.m_ki("s", "w1") == 1


def test_associate_skew_expansion():
    # Midpoint just outside the nominal window but inside the skew margin.
    result = associate_visits({"cam0": [visit(99.3)]}, SCHEDULE, STATIONS, skew_tol=1.0)
    assert len(result.matched) == 1
    strict = associate_visits({"cam0": [visit(99.3)]}, SCHEDULE, STATIONS, skew_tol=0.1)
    assert strict.orphans == [visit(99.3)]


def test_associate_missing_rounds_reported():
    result = associate_visits({"cam0": [visit(102.5)]}, SCHEDULE, STATIONS)
    missing = {(e.waypoint_id, e.round_index) for e in result.missing}
    assert missing == {("w1", 2), ("w2", 1), ("w2", 2)}
    c = completeness(result.table)
    assert c.ratio == 0.0  # no waypoint attained in all rounds


def test_associate_visibility_failure():
    result = associate_visits(
        {"cam0": [visit(102.5, visible=False)]}, SCHEDULE, STATIONS
    )
    assert result.table.m_ki("s", "w1") == 0
    assert len(result.failed_visibility) == 1
    assert len(result.matched) == 0
    # The failed entry is not double-reported as missing.
    missing = {(e.waypoint_id, e.round_index) for e in result.missing}
    assert ("w1", 1) not in missing


def test_associate_two_visits_one_entry():
    with pytest.raises(AssociationAmbiguityError, match="two visits"):
        associate_visits(
            {"cam0": [visit(101.0), visit(104.5)]}, SCHEDULE, STATIONS
        )


def test_associate_one_visit_two_entries():
    overlapping = SCHEDULE + [ScheduleEntry("s", "w1", 3, 104.0, 109.0)]
    with pytest.raises(AssociationAmbiguityError, match="2 schedule windows"):
        associate_visits({"cam0": [visit(104.5)]}, overlapping, STATIONS, rounds=3)


def test_associate_unknown_station():
    with pytest.raises(InputFormatError, match="ghostcam"):
        associate_visits({"ghostcam": [visit(100.0)]}, SCHEDULE, STATIONS)


def test_associate_empty_schedule():
    with pytest.raises(InputFormatError, match="schedule"):
        associate_visits({}, [], STATIONS)


def test_associate_records_station_frame():
    result = associate_visits({"cam0": [visit(102.5)]}, SCHEDULE, STATIONS)
    rec = result.table.records("s", "w1")[0]
    assert rec.frame_id == "cam0"
    assert rec.timestamp == pytest.approx(102.5)


def test_priming_round_entries_excluded_from_counts():
    schedule = [ScheduleEntry("s", "w1", 0, 50.0, 55.0)] + SCHEDULE
    result = associate_visits({"cam0": [visit(52.0)]}, schedule, STATIONS)
    assert result.table.m_ki("s", "w1") == 0
    assert len(result.table.records("s", "w1", include_priming=True)) == 1


# ---------------------------------------------------------------------------
# local frames


def test_local_frame_passthrough():
    result = associate_visits({"cam0": [visit(102.5)]}, SCHEDULE, STATIONS)
    table = local_frame_records(result.table)
    assert table is result.table


def test_local_frame_mixed_stations_rejected():
    # Reachable only by assembling a table by hand: association itself
    # stamps one frame per waypoint.
    table = AttainmentTable(2)
    table.mark_attainment(AttainmentRecord("s", "w", 1, Pose2(0, 0, 0), frame_id="camA"))
    table._cells[("s", "w")][2] = AttainmentRecord(
        "s", "w", 2, Pose2(0, 0, 0), frame_id="camB"
    )
    with pytest.raises(FrameMismatchError, match="camA"):
        local_frame_records(table)


def test_rigid_station_motion_leaves_precision_unchanged():
    # Re-mounting a camera rigidly transforms all its detections; the
    # waypoint's precision must not care.
    rng = np.random.default_rng(0)
    poses = [Pose2(0.1 * rng.normal(), 0.1 * rng.normal(), 0.05 * rng.normal()) for _ in range(5)]
    base = waypoint_precision(poses)
    mount = Pose2(3.0, -1.0, 2.2)
    moved = waypoint_precision([mount.compose(p) for p in poses])
    assert moved.position_m == pytest.approx(base.position_m, abs=1e-9)
    assert moved.orientation_rad == pytest.approx(base.orientation_rad, abs=1e-9)


# ---------------------------------------------------------------------------
# end-to-end synthesis


def synthesize_tour(rng, n_waypoints=4, rounds=3, dwell=5.0, leg=30.0):
    """Build (log text, schedule, station map, attained set) with random
    per-station clock skew and a random attainment pattern."""
    schedule = []
    station_map = {}
    skews = {}
    attained = set()
    lines = []
    t = 50.0
    for j in range(1, rounds + 1):
        for i in range(n_waypoints):
            wp = f"w{i}"
            cam = f"cam{i}"
            station_map[cam] = wp
            skews.setdefault(cam, rng.uniform(-0.9, 0.9))
            schedule.append(ScheduleEntry("s", wp, j, t, t + dwell))
            if rng.random() < 0.8:
                attained.add((wp, j))
                skew = skews[cam]
                for k in range(6):
                    ts = t + skew + dwell * k / 5.0
                    lines.append(det_line(ts, station=cam, x=float(i), y=float(j)))
            t += leg
    return "\n".join(lines), schedule, station_map, attained


@settings(deadline=None, max_examples=10)
@given(st.integers(0, 10_000))
def test_end_to_end_reproduces_pattern(seed):
    rng = np.random.default_rng(seed)
    text, schedule, station_map, attained = synthesize_tour(rng)
    result = ingest(
        [("synthetic", text)], schedule, station_map, gap_max=3.0, dwell_min=2.0
    )
    got = set()
    for seq_id, wp_id in result.table.waypoints():
        for rec in result.table.records(seq_id, wp_id):
            got.add((wp_id, rec.round_index))
    assert got == attained
    assert not result.orphans
    assert len(result.missing) == len(schedule) - len(attained)
