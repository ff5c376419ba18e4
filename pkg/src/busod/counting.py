"""IN/OUT events from tracklet motion through a door ROI.

Four policies share one crossing detector and differ only in which events
they keep: ``baseline`` keeps all, ``door_state`` keeps those logged while the
door is open, ``queue_aware`` additionally asks for a visit to the exterior
queue region around the crossing, and ``hybrid`` keeps all events but is fed
by a tracker that switches to head detections in crowded frames.
"""

from __future__ import annotations

import bisect
import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from busod.errors import ConfigError, MissingQueueRegion
from busod.geometry import Roi, contains, signed_distance
from busod.timeline import bucket_events
from busod.tracking import DetectorKind, Tracklet


class Direction(enum.Enum):
    IN = "in"
    OUT = "out"


class CountingPolicy(enum.Enum):
    BASELINE = "baseline"
    DOOR_STATE = "door_state"
    HYBRID = "hybrid"
    QUEUE_AWARE = "queue_aware"


@dataclass(frozen=True, slots=True)
class RoiEvent:
    camera_id: str
    local_id: int
    direction: Direction
    frame_index: int
    resolved_time: int
    policy: CountingPolicy = CountingPolicy.BASELINE
    door_id: str = "door"

    def sort_key(self) -> tuple:
        return (self.resolved_time, self.camera_id, self.local_id, self.frame_index)


@dataclass(frozen=True, slots=True)
class DoorStateSample:
    time: int
    door_id: str
    open: bool


@dataclass(frozen=True)
class CountingConfig:
    policy: CountingPolicy = CountingPolicy.BASELINE
    density_threshold: int = 5
    hysteresis_frames: int = 3
    door_close_grace: float = 2.0
    dedup_window: float = 3.0
    queue_confirm_window: float = 4.0

    def __post_init__(self) -> None:
        if not isinstance(self.policy, CountingPolicy):
            object.__setattr__(self, "policy", CountingPolicy(self.policy))
        if min(self.density_threshold, self.hysteresis_frames) < 1:
            raise ConfigError("counting thresholds must be positive")
        if min(self.door_close_grace, self.dedup_window, self.queue_confirm_window) <= 0:
            raise ConfigError("counting windows must be positive")


class DoorTimeline:
    """Step-hold door state per door; closed before the first sample."""

    def __init__(self, samples: Iterable[DoorStateSample]) -> None:
        by_door: dict[str, list[DoorStateSample]] = defaultdict(list)
        for s in samples:
            by_door[s.door_id].append(s)
        self._times: dict[str, list[int]] = {}
        self._states: dict[str, list[bool]] = {}
        for door, ss in by_door.items():
            ss.sort(key=lambda s: s.time)
            self._times[door] = [s.time for s in ss]
            self._states[door] = [s.open for s in ss]

    def is_open(self, door_id: str, t: int) -> bool:
        times = self._times.get(door_id)
        if not times:
            return False
        i = bisect.bisect_right(times, t) - 1
        return i >= 0 and self._states[door_id][i]

    def doors(self) -> list[str]:
        return sorted(self._times)


def detect_crossings(
    tracklet: Tracklet,
    roi: Roi,
    cfg: CountingConfig,
    policy: CountingPolicy | None = None,
) -> list[RoiEvent]:
    """Sign changes of the centre's door-line distance, held for hysteresis.

    A centre exactly on the line counts as exterior. The event is stamped at
    the first sample of the sustained new side.
    """
    dets = tracklet.detections
    if len(dets) < 2:
        return []
    policy = policy or cfg.policy
    sides = [1 if signed_distance(d.center, roi.door_line) > 0 else -1 for d in dets]
    committed = sides[0]
    run_start: int | None = None
    events: list[RoiEvent] = []
    for i, s in enumerate(sides):
        if s == committed:
            run_start = None
            continue
        if run_start is None:
            run_start = i
        if i - run_start + 1 >= cfg.hysteresis_frames:
            first = dets[run_start]
            events.append(
                RoiEvent(
                    camera_id=tracklet.camera_id,
                    local_id=tracklet.local_id,
                    direction=Direction.IN if s > 0 else Direction.OUT,
                    frame_index=first.frame_index,
                    resolved_time=first.time_ms if first.time_ms is not None else -1,
                    policy=policy,
                    door_id=roi.door_id,
                )
            )
            committed = s
            run_start = None
    return events


def apply_baseline(events: Sequence[RoiEvent], *_args, **_kwargs) -> list[RoiEvent]:
    return list(events)


def apply_door_state(
    events: Sequence[RoiEvent],
    door_samples: Iterable[DoorStateSample] | DoorTimeline,
    cfg: CountingConfig | None = None,
) -> list[RoiEvent]:
    """Keep events logged while their door is open.

    Closure suppresses immediately, so the post-closure grace window is
    already covered: anything after a close transition is dropped.
    """
    doors = door_samples if isinstance(door_samples, DoorTimeline) else DoorTimeline(door_samples)
    return [e for e in events if doors.is_open(e.door_id, e.resolved_time)]


def select_detector(occupancy: int, cfg: CountingConfig) -> DetectorKind:
    return DetectorKind.HEAD_ONLY if occupancy > cfg.density_threshold else DetectorKind.FULL_BODY


def _visited_queue(
    tracklet: Tracklet, queue: Sequence, lo: int, hi: int
) -> bool:
    for d in tracklet.detections:
        t = d.time_ms
        if t is not None and lo <= t <= hi and contains(queue, d.center):
            return True
    return False


def apply_queue_aware(
    events: Sequence[RoiEvent],
    tracklets: Mapping[int, Tracklet],
    roi: Roi,
    door_samples: Iterable[DoorStateSample] | DoorTimeline,
    cfg: CountingConfig,
) -> list[RoiEvent]:
    """Door gating plus a queue-region visit just before an IN / after an OUT."""
    if roi.queue_region is None:
        raise MissingQueueRegion(f"queue_aware policy needs a queue_region for door {roi.door_id}")
    window = round(cfg.queue_confirm_window * 1000)
    kept = []
    for e in apply_door_state(events, door_samples, cfg):
        trk = tracklets.get(e.local_id)
        if trk is None:
            continue
        t = e.resolved_time
        if e.direction is Direction.IN:
            ok = _visited_queue(trk, roi.queue_region, t - window, t - 1)
        else:
            ok = _visited_queue(trk, roi.queue_region, t + 1, t + window)
        if ok:
            kept.append(e)
    return kept


def apply_policy(
    events: Sequence[RoiEvent],
    policy: CountingPolicy,
    *,
    tracklets: Mapping[int, Tracklet] | None = None,
    roi: Roi | None = None,
    doors: DoorTimeline | None = None,
    cfg: CountingConfig,
) -> list[RoiEvent]:
    doors = doors or DoorTimeline([])
    if policy in (CountingPolicy.BASELINE, CountingPolicy.HYBRID):
        return apply_baseline(events)
    if policy is CountingPolicy.DOOR_STATE:
        return apply_door_state(events, doors, cfg)
    if roi is None or tracklets is None:
        raise ConfigError("queue_aware policy needs tracklets and an ROI")
    return apply_queue_aware(events, tracklets, roi, doors, cfg)


def count_tracklets(
    tracklets: Sequence[Tracklet],
    roi: Roi,
    cfg: CountingConfig,
    policy: CountingPolicy | None = None,
    doors: DoorTimeline | None = None,
) -> list[RoiEvent]:
    """Crossings of every tracklet, filtered by ``policy``, in time order."""
    policy = policy or cfg.policy
    raw = [e for t in tracklets for e in detect_crossings(t, roi, cfg, policy)]
    kept = apply_policy(
        raw,
        policy,
        tracklets={t.local_id: t for t in tracklets},
        roi=roi,
        doors=doors,
        cfg=cfg,
    )
    return sorted(kept, key=RoiEvent.sort_key)


def per_second_counts(events: Iterable[RoiEvent]) -> dict[int, tuple[int, int]]:
    out = {}
    for sec, bucket in bucket_events((e.resolved_time, e) for e in events).items():
        n_in = sum(e.direction is Direction.IN for e in bucket)
        out[sec] = (n_in, len(bucket) - n_in)
    return out
