"""Per-frame overlay strings plus FPS -> a millisecond timeline.

Recorders burn a wall-clock second into every frame, so consecutive frames
share a value. The first frame of each run of identical seconds is taken as
offset zero for that second and later frames are placed by frame count.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from fractions import Fraction
from typing import Iterable, Sequence, TypeVar
from zoneinfo import ZoneInfo

from busod.errors import (
    ClockInconsistency,
    ConfigError,
    InputSchemaError,
    OcrParseError,
    TimelineUnresolvable,
)

DEFAULT_FORMAT = "%Y-%m-%d %H:%M:%S"

T = TypeVar("T")


@dataclass(frozen=True)
class VideoMeta:
    fps: float | Fraction
    camera_id: str
    segment_id: str = "segment"

    def __post_init__(self) -> None:
        if not self.fps > 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")

    @property
    def fps_exact(self) -> Fraction:
        if isinstance(self.fps, Fraction):
            return self.fps
        return Fraction(str(self.fps))


@dataclass(frozen=True)
class FrameStamp:
    frame_index: int
    overlay_string: str
    resolved_time: int | None = None


def _tzinfo(tz: str | None):
    if tz is None or tz.upper() == "UTC":
        return timezone.utc
    try:
        return ZoneInfo(tz)
    except Exception as exc:  # ZoneInfoNotFoundError, ValueError
        raise ConfigError(f"unknown timezone {tz!r}") from exc


def parse_overlay(s: str, fmt: str = DEFAULT_FORMAT, tz: str | None = "UTC") -> int:
    """Parse an overlay string to epoch milliseconds (second resolution)."""
    try:
        dt = datetime.strptime(s.strip(), fmt)
    except (ValueError, AttributeError) as exc:
        raise OcrParseError(s) from exc
    dt = dt.replace(tzinfo=_tzinfo(tz))
    return int(dt.timestamp()) * 1000


def format_overlay(epoch_ms: int, fmt: str = DEFAULT_FORMAT) -> str:
    return datetime.fromtimestamp(epoch_ms // 1000, tz=timezone.utc).strftime(fmt)


def frame_offset_ms(frames: int, fps: Fraction) -> int:
    """round(1000 * frames / fps) with halves rounded up."""
    return math.floor(Fraction(1000 * frames) / fps + Fraction(1, 2))


def resolve_timeline(
    stamps: Sequence[FrameStamp],
    meta: VideoMeta,
    fmt: str = DEFAULT_FORMAT,
    tz: str | None = "UTC",
) -> list[FrameStamp]:
    if not stamps:
        return []
    fps = meta.fps_exact
    for prev, cur in zip(stamps, stamps[1:]):
        if cur.frame_index <= prev.frame_index:
            raise InputSchemaError(
                f"camera {meta.camera_id}: frame indices must be strictly increasing "
                f"({prev.frame_index} then {cur.frame_index})"
            )

    parsed: list[int | None] = []
    for st in stamps:
        try:
            parsed.append(parse_overlay(st.overlay_string, fmt, tz))
        except OcrParseError:
            parsed.append(None)
    if all(p is None for p in parsed):
        raise TimelineUnresolvable(f"camera {meta.camera_id}: no parseable overlay timestamps")

    times: list[int | None] = [None] * len(stamps)
    run_second: int | None = None
    anchor_index = 0
    for i, (st, sec) in enumerate(zip(stamps, parsed)):
        if sec is not None and run_second is not None and sec < run_second:
            if run_second - sec > 1000:
                raise ClockInconsistency(
                    f"camera {meta.camera_id}: overlay went back from "
                    f"{format_overlay(run_second)} to {st.overlay_string!r} at frame {st.frame_index}"
                )
            # one-second regressions are treated as misreads
            sec = None
        if sec is not None and sec != run_second:
            run_second, anchor_index = sec, st.frame_index
        if run_second is not None:
            times[i] = run_second + frame_offset_ms(st.frame_index - anchor_index, fps)

    # leading frames before the first readable overlay: extrapolate backwards
    first = next(i for i, t in enumerate(times) if t is not None)
    first_idx = stamps[first].frame_index
    for i in range(first):
        times[i] = times[first] - frame_offset_ms(first_idx - stamps[i].frame_index, fps)

    out: list[FrameStamp] = []
    prev_t: int | None = None
    for st, t in zip(stamps, times):
        assert t is not None
        if prev_t is not None and t <= prev_t:
            t = prev_t + 1
        out.append(replace(st, resolved_time=t))
        prev_t = t
    return out


def bucket_events(events: Iterable[tuple[int, T]]) -> dict[int, list[T]]:
    """Group ``(resolved_time_ms, payload)`` pairs by epoch second."""
    buckets: dict[int, list[T]] = defaultdict(list)
    for t, payload in events:
        buckets[t // 1000].append(payload)
    return dict(sorted(buckets.items()))


def time_map(stamps: Sequence[FrameStamp]) -> dict[int, int]:
    """frame_index -> resolved_time for resolved stamps."""
    return {st.frame_index: st.resolved_time for st in stamps if st.resolved_time is not None}
