"""Stop classification from wheel speed, GPS and door state.

A halt near a registered stop is official; a halt away from every stop, or
slow rolling with an open door while passengers cross the door line, is an
illegal stop. Instant labels are grouped into stop intervals afterwards.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from statistics import median
from typing import Iterable, Sequence

from busod.errors import ConfigError, InputSchemaError

EARTH_RADIUS_M = 6371008.8


@dataclass(frozen=True, slots=True)
class TelematicsSample:
    time: int
    speed: float
    lat: float
    lon: float
    odometer: float = 0.0
    door_open: bool | None = None


@dataclass(frozen=True, slots=True)
class Stop:
    stop_id: str
    name: str
    lat: float
    lon: float


@dataclass(frozen=True)
class StopRegistry:
    stops: tuple[Stop, ...]

    def __post_init__(self) -> None:
        ids = [s.stop_id for s in self.stops]
        if len(set(ids)) != len(ids):
            raise ConfigError("stop ids in the registry must be unique")

    def ids(self) -> list[str]:
        return [s.stop_id for s in self.stops]


@dataclass(frozen=True)
class StopConfig:
    delta_gps: float = 50.0
    tau_slow: float = 6.0
    min_dwell: float = 3.0
    merge_gap: float = 5.0
    zero_speed_epsilon: float = 0.5

    def __post_init__(self) -> None:
        if self.delta_gps <= 0 or self.tau_slow <= 0:
            raise ConfigError("stops.delta_gps and stops.tau_slow must be positive")
        if self.min_dwell < 0 or self.merge_gap < 0 or self.zero_speed_epsilon < 0:
            raise ConfigError("stop windows must be non-negative")


class InstantClass(enum.Enum):
    OFFICIAL = "official_candidate"
    ILLEGAL = "illegal_candidate"
    MOVING = "moving"


class StopKind(enum.Enum):
    OFFICIAL = "official"
    ILLEGAL = "illegal"


@dataclass(frozen=True)
class StopEvent:
    kind: StopKind
    stop_id: str
    t_start: int
    t_end: int
    lat: float
    lon: float

    @property
    def midpoint(self) -> float:
        return (self.t_start + self.t_end) / 2.0


def _check_coord(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0) or math.isnan(lat) or math.isnan(lon):
        raise InputSchemaError(f"coordinate out of range: ({lat}, {lon})")


def haversine_m(p1: tuple[float, float], p2: tuple[float, float]) -> float:
    """Great-circle distance in metres between ``(lat, lon)`` pairs."""
    lat1, lon1 = p1
    lat2, lon2 = p2
    _check_coord(lat1, lon1)
    _check_coord(lat2, lon2)
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def nearest_stop(g: tuple[float, float], registry: StopRegistry) -> tuple[str, float]:
    if not registry.stops:
        raise ConfigError("stop registry is empty")
    best = min(registry.stops, key=lambda s: (haversine_m(g, (s.lat, s.lon)), s.stop_id))
    return best.stop_id, haversine_m(g, (best.lat, best.lon))


def classify_instant(
    s: TelematicsSample,
    registry: StopRegistry,
    cfg: StopConfig,
    roi_event_now: bool,
    door_open: bool | None = None,
) -> InstantClass:
    """Label one sample.

    ``door_open`` is used when the sample itself carries no door field.
    """
    _, dist = nearest_stop((s.lat, s.lon), registry)
    if s.speed <= cfg.zero_speed_epsilon:
        return InstantClass.OFFICIAL if dist <= cfg.delta_gps else InstantClass.ILLEGAL
    door = s.door_open if s.door_open is not None else bool(door_open)
    if s.speed < cfg.tau_slow and door and roi_event_now:
        return InstantClass.ILLEGAL
    return InstantClass.MOVING


def _sample_period(samples: Sequence[TelematicsSample]) -> int:
    if len(samples) < 2:
        return 1000
    return int(median(b.time - a.time for a, b in zip(samples, samples[1:])))


def segment_stops(
    samples: Sequence[TelematicsSample],
    classifications: Sequence[InstantClass],
    cfg: StopConfig,
    registry: StopRegistry,
) -> list[StopEvent]:
    """Group candidate instants into stop intervals.

    A run covers its samples plus one sample period. Same-kind runs closer
    than ``merge_gap`` merge; runs shorter than ``min_dwell`` are dropped.
    """
    if len(samples) != len(classifications):
        raise InputSchemaError("classifications must align with samples")
    period = _sample_period(samples)
    runs: list[list] = []  # [kind, first_idx, last_idx]
    for i, c in enumerate(classifications):
        if c is InstantClass.MOVING:
            continue
        if runs and runs[-1][0] is c and runs[-1][2] == i - 1:
            runs[-1][2] = i
        else:
            runs.append([c, i, i])

    merged: list[list] = []
    for run in runs:
        if merged and merged[-1][0] is run[0]:
            prev_end = samples[merged[-1][2]].time + period
            if samples[run[1]].time - prev_end < cfg.merge_gap * 1000:
                merged[-1][2] = run[2]
                continue
        merged.append(list(run))

    events: list[StopEvent] = []
    illegal_n = 0
    for kind, i0, i1 in merged:
        t_start = samples[i0].time
        t_end = samples[i1].time + period
        if t_end - t_start < cfg.min_dwell * 1000:
            continue
        members = [
            samples[i] for i in range(i0, i1 + 1) if classifications[i] is not InstantClass.MOVING
        ]
        lat = sum(m.lat for m in members) / len(members)
        lon = sum(m.lon for m in members) / len(members)
        if kind is InstantClass.OFFICIAL:
            votes = Counter(nearest_stop((m.lat, m.lon), registry)[0] for m in members)
            stop_id = min(votes, key=lambda k: (-votes[k], k))
            events.append(StopEvent(StopKind.OFFICIAL, stop_id, t_start, t_end, lat, lon))
        else:
            illegal_n += 1
            events.append(StopEvent(StopKind.ILLEGAL, f"ILLEGAL-{illegal_n}", t_start, t_end, lat, lon))
    return events


def classify_stream(
    samples: Sequence[TelematicsSample],
    registry: StopRegistry,
    cfg: StopConfig,
    roi_event_seconds: Iterable[int] = (),
    door_open_at=None,
) -> list[InstantClass]:
    """Classify every sample; ``door_open_at(t_ms)`` supplies door state if needed."""
    seconds = set(roi_event_seconds)
    out = []
    for s in samples:
        door = door_open_at(s.time) if door_open_at is not None and s.door_open is None else None
        out.append(classify_instant(s, registry, cfg, (s.time // 1000) in seconds, door))
    return out
