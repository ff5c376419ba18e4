import csv
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from busod.errors import ConfigError, InputSchemaError
from busod.telematics import (
    InstantClass,
    Stop,
    StopConfig,
    StopKind,
    StopRegistry,
    TelematicsSample,
    classify_instant,
    classify_stream,
    haversine_m,
    nearest_stop,
    segment_stops,
)

FIXTURE = Path(__file__).parent / "fixtures" / "stop_rules.csv"
REGISTRY = StopRegistry((Stop("S1", "first", 0.0, 0.0), Stop("S2", "second", 0.0, 0.01)))
CFG = StopConfig(delta_gps=50.0, tau_slow=6.0)


def load_fixture():
    rows = list(csv.DictReader(FIXTURE.open()))
    out = []
    for r in rows:
        s = TelematicsSample(
            int(r["time_ms"]), float(r["speed_kmh"]), float(r["lat"]), float(r["lon"]),
            float(r["odometer_km"]), r["door_open"] == "1",
        )
        out.append((s, r["roi_event"] == "1", InstantClass(r["expected"])))
    return out


def test_fixture_table():
    rows = load_fixture()
    assert len(rows) == 12
    assert {exp for *_, exp in rows} == set(InstantClass)
    for sample, roi, expected in rows:
        assert classify_instant(sample, REGISTRY, CFG, roi) is expected, sample


def test_haversine_examples():
    assert haversine_m((10.0, 20.0), (10.0, 20.0)) == 0.0
    assert haversine_m((0, 0), (0, 0.001)) == pytest.approx(6371008.8 * 0.001 * math.pi / 180, rel=1e-12)
    with pytest.raises(InputSchemaError):
        haversine_m((91, 0), (0, 0))


coords = st.tuples(st.floats(-89, 89), st.floats(-179, 179))


@given(coords, coords)
def test_haversine_symmetric(p, q):
    assert haversine_m(p, q) == pytest.approx(haversine_m(q, p), abs=1e-6)


def test_nearest_stop_examples():
    assert nearest_stop((0.0, 0.0), REGISTRY) == ("S1", 0.0)
    assert nearest_stop((0.0, 0.005), REGISTRY)[0] == "S1"
    with pytest.raises(ConfigError):
        nearest_stop((0, 0), StopRegistry(()))


def test_nearest_stop_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(200):
        stops = tuple(Stop(f"S{k}", "", *rng.uniform(-0.05, 0.05, 2)) for k in range(3))
        reg = StopRegistry(stops)
        g = tuple(rng.uniform(-0.05, 0.05, 2))
        sid, dist = nearest_stop(g, reg)
        scan = [haversine_m(g, (s.lat, s.lon)) for s in stops]
        assert dist == min(scan)
        assert sid == stops[int(np.argmin(scan))].stop_id


def test_door_from_separate_stream():
    s = TelematicsSample(0, 4.0, 0.0, 0.003)
    assert classify_instant(s, REGISTRY, CFG, True, door_open=True) is InstantClass.ILLEGAL
    assert classify_instant(s, REGISTRY, CFG, True, door_open=False) is InstantClass.MOVING


@given(st.floats(0, 0.5), st.floats(0, 0.01), st.floats(1, 500), st.floats(0, 500))
def test_halt_rules(speed, lon, delta, extra):
    s = TelematicsSample(0, speed, 0.0, lon)
    small = classify_instant(s, REGISTRY, StopConfig(delta_gps=delta), False)
    big = classify_instant(s, REGISTRY, StopConfig(delta_gps=delta + extra), False)
    assert small is not InstantClass.MOVING
    if small is InstantClass.OFFICIAL:
        assert big is InstantClass.OFFICIAL


def _stream(labels, lon=0.0):
    samples = [TelematicsSample(i * 1000, 0.0, 0.0, lon) for i in range(len(labels))]
    return samples, labels


O, I, M = InstantClass.OFFICIAL, InstantClass.ILLEGAL, InstantClass.MOVING


def test_segment_examples():
    samples, labels = _stream([M] + [O] * 10 + [M])
    evs = segment_stops(samples, labels, CFG, REGISTRY)
    assert [(e.kind, e.stop_id, e.t_start, e.t_end) for e in evs] == [(StopKind.OFFICIAL, "S1", 1000, 11000)]
    samples, labels = _stream([M, O, O, M])
    assert segment_stops(samples, labels, CFG, REGISTRY) == []
    # runs end at 5 s and resume at 9 s: a 4 s gap merges
    samples, labels = _stream([O] * 5 + [M] * 4 + [O] * 5)
    evs = segment_stops(samples, labels, CFG, REGISTRY)
    assert len(evs) == 1 and (evs[0].t_start, evs[0].t_end) == (0, 14000)
    samples, labels = _stream([O] * 5 + [M] * 6 + [O] * 5)
    assert len(segment_stops(samples, labels, CFG, REGISTRY)) == 2


def test_illegal_ids_in_time_order():
    samples, labels = _stream([I] * 4 + [M] * 20 + [I] * 4, lon=0.005)
    evs = segment_stops(samples, labels, CFG, REGISTRY)
    assert [e.stop_id for e in evs] == ["ILLEGAL-1", "ILLEGAL-2"]


@given(st.lists(st.sampled_from([O, I, M]), min_size=1, max_size=80))
def test_stop_events_disjoint_and_ordered(labels):
    samples, labels = _stream(labels)
    evs = segment_stops(samples, labels, CFG, REGISTRY)
    for e in evs:
        assert e.t_start < e.t_end
    for a, b in zip(evs, evs[1:]):
        assert a.t_end <= b.t_start


def test_classify_stream_uses_roi_seconds():
    s = [TelematicsSample(5000, 4.0, 0.0, 0.003), TelematicsSample(6000, 4.0, 0.0, 0.003)]
    out = classify_stream(s, REGISTRY, CFG, roi_event_seconds=[6], door_open_at=lambda t: True)
    assert out == [M, I]


def test_config_validation():
    with pytest.raises(ConfigError):
        StopConfig(delta_gps=0)
    with pytest.raises(ConfigError):
        StopRegistry((Stop("S1", "", 0, 0), Stop("S1", "", 1, 1)))
