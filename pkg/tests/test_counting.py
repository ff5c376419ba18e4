import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from busod.counting import (
    CountingConfig,
    CountingPolicy,
    Direction,
    DoorStateSample,
    DoorTimeline,
    RoiEvent,
    apply_baseline,
    apply_door_state,
    apply_queue_aware,
    count_tracklets,
    detect_crossings,
    per_second_counts,
    select_detector,
)
from busod.errors import ConfigError, MissingQueueRegion
from busod.geometry import Point2, Roi
from busod.tracking import DetectorKind
from factories import det, door_roi, track, unit

QUEUE = tuple(Point2(x, y) for x, y in [(0, 0), (200, 0), (200, 90), (0, 90)])


def queue_roi() -> Roi:
    base = door_roi()
    return Roi(base.polygon, base.door_line, QUEUE, door_id="front")


def walker(distances, t0=0, step_ms=1000, ys=None, local_id=1):
    """Centres at the given signed distances from the door line y=100."""
    ys = ys or [100 + d for d in distances]
    dets = [det(i, 100, y, unit(1, 0), h=20, t=t0 + i * step_ms) for i, y in enumerate(ys)]
    return track(local_id, dets)


CFG = CountingConfig()


def test_crossing_examples():
    roi = door_roi()
    evs = detect_crossings(walker([-5, -2, 1, 3, 4]), roi, CFG)
    assert [(e.direction, e.frame_index) for e in evs] == [(Direction.IN, 2)]
    assert detect_crossings(walker([-5, 1, -4, -4, -4]), roi, CFG) == []
    evs = detect_crossings(walker([-3, -1, 2, 4, 4, 1, -2, -5]), roi, CountingConfig(hysteresis_frames=2))
    assert [e.direction for e in evs] == [Direction.IN, Direction.OUT]
    assert [e.frame_index for e in evs] == [2, 6]


def test_on_line_counts_as_exterior():
    evs = detect_crossings(walker([0, 0, 1, 1, 1]), door_roi(), CFG)
    assert [e.direction for e in evs] == [Direction.IN]


def test_event_time_is_first_sustained_sample():
    evs = detect_crossings(walker([-5, -2, 1, 3, 4], t0=7000), door_roi(), CFG)
    assert evs[0].resolved_time == 9000


@given(st.lists(st.integers(-10, 10).filter(lambda v: v != 0), min_size=2, max_size=60), st.integers(1, 5))
def test_events_alternate(distances, h):
    evs = detect_crossings(walker(distances), door_roi(), CountingConfig(hysteresis_frames=h))
    dirs = [e.direction for e in evs]
    assert all(a is not b for a, b in zip(dirs, dirs[1:]))


def _ev(t_ms, direction=Direction.IN, local_id=1):
    return RoiEvent("A", local_id, direction, 0, t_ms, door_id="front")


def test_baseline_is_identity():
    evs = [_ev(1000), _ev(2000, Direction.OUT)]
    assert apply_baseline(evs) == evs
    assert apply_baseline([]) == []


def test_door_state_examples():
    samples = [DoorStateSample(0, "front", True), DoorStateSample(10_000, "front", False)]
    assert apply_door_state([_ev(5000)], samples, CFG) == [_ev(5000)]
    assert apply_door_state([_ev(11_000)], samples, CFG) == []
    assert apply_door_state([_ev(5000)], [], CFG) == []


def test_door_timeline_step_hold():
    tl = DoorTimeline([DoorStateSample(1000, "d", True), DoorStateSample(3000, "d", False)])
    assert [tl.is_open("d", t) for t in (999, 1000, 2999, 3000)] == [False, True, True, False]
    assert not tl.is_open("other", 2000)


def test_select_detector():
    assert select_detector(3, CFG) is DetectorKind.FULL_BODY
    assert select_detector(6, CFG) is DetectorKind.HEAD_ONLY
    assert select_detector(5, CFG) is DetectorKind.FULL_BODY
    kinds = [select_detector(n, CFG) for n in range(11)]
    assert kinds == [DetectorKind.FULL_BODY] * 6 + [DetectorKind.HEAD_ONLY] * 5


OPEN = [DoorStateSample(0, "front", True)]


def test_queue_aware_examples():
    roi = queue_roi()
    # queued at y=50 two seconds before crossing
    boarder = walker(None, ys=[50, 50, 95, 120, 130, 140])
    evs = count_tracklets([boarder], roi, CFG, CountingPolicy.QUEUE_AWARE, DoorTimeline(OPEN))
    assert [e.direction for e in evs] == [Direction.IN]
    # starts inside, crosses out 10 s later and lingers by the line
    leaver = walker(None, ys=[140] * 10 + [95, 95, 95, 95, 95, 95, 95])
    raw = detect_crossings(leaver, roi, CFG)
    assert [e.direction for e in raw] == [Direction.OUT]
    assert apply_queue_aware(raw, {1: leaver}, roi, OPEN, CFG) == []
    # waits in the queue and never crosses
    waiter = walker(None, ys=[50] * 8)
    assert count_tracklets([waiter], roi, CFG, CountingPolicy.QUEUE_AWARE, DoorTimeline(OPEN)) == []


def test_queue_aware_needs_region():
    with pytest.raises(MissingQueueRegion):
        apply_queue_aware([_ev(0)], {}, door_roi(), OPEN, CFG)


def test_queue_region_must_be_exterior():
    base = door_roi()
    inside = tuple(Point2(x, y) for x, y in [(0, 120), (50, 120), (50, 160)])
    with pytest.raises(ConfigError):
        Roi(base.polygon, base.door_line, inside)


def test_filters_are_nested():
    rng = np.random.default_rng(1)
    roi = queue_roi()
    samples = [DoorStateSample(0, "front", True), DoorStateSample(20_000, "front", False),
               DoorStateSample(40_000, "front", True)]
    tracks = []
    for k in range(20):
        ys = list(np.clip(np.cumsum(rng.normal(0, 25, size=30)) + 100, 0, 200))
        tracks.append(walker(None, ys=ys, t0=int(rng.integers(0, 50_000)), local_id=k + 1))
    raw = [e for t in tracks for e in detect_crossings(t, roi, CFG)]
    door = apply_door_state(raw, samples, CFG)
    queue = apply_queue_aware(raw, {t.local_id: t for t in tracks}, roi, samples, CFG)
    assert set(door) <= set(raw)
    assert set(queue) <= set(door)
    assert len(raw) > len(door) > 0


def test_closed_door_loiterer():
    # four crossings while the door stays closed
    loiterer = walker([-20, -20, -20, 20, 20, 20, -20, -20, -20, 20, 20, 20, -20, -20, -20])
    raw = detect_crossings(loiterer, door_roi(), CFG)
    assert len(raw) == 4
    assert len(apply_baseline(raw)) >= 1
    closed = [DoorStateSample(0, "front", False)]
    assert apply_door_state(raw, closed, CFG) == []


def test_per_second_counts():
    evs = [_ev(5100), _ev(5900), _ev(5500, Direction.OUT), _ev(7000, Direction.OUT)]
    assert per_second_counts(evs) == {5: (2, 1), 7: (0, 1)}
    assert per_second_counts([]) == {}


def test_config_validation():
    with pytest.raises(ConfigError):
        CountingConfig(hysteresis_frames=0)
    with pytest.raises(ValueError):
        CountingConfig(policy="sometimes")
