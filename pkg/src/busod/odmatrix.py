"""Journeys and the origin-destination matrix.

Events are attributed to the stop interval that contains them (with some
slack), then each identity's time-ordered events are folded into journeys:
the first IN opens a journey, the last OUT before the next IN closes it.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from busod.counting import Direction, RoiEvent
from busod.telematics import StopEvent, StopRegistry


@dataclass(frozen=True)
class Journey:
    global_id: int
    board_stop: str | None
    alight_stop: str | None
    board_time: int | None
    alight_time: int | None

    @property
    def complete(self) -> bool:
        return self.board_stop is not None and self.alight_stop is not None


@dataclass
class OdMatrix:
    stops: list[str]
    counts: dict[tuple[str, str], int] = field(default_factory=dict)
    unmatched_boardings: int = 0
    unmatched_alightings: int = 0
    same_stop_journeys: int = 0

    def get(self, origin: str, dest: str) -> int:
        return self.counts.get((origin, dest), 0)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def rows(self) -> list[list[int]]:
        return [[self.get(o, d) for d in self.stops] for o in self.stops]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["origin"] + self.stops)
        for o, row in zip(self.stops, self.rows()):
            w.writerow([o] + row)
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "stops": list(self.stops),
            "counts": self.rows(),
            "total": self.total,
            "unmatched_boardings": self.unmatched_boardings,
            "unmatched_alightings": self.unmatched_alightings,
            "same_stop_journeys": self.same_stop_journeys,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> OdMatrix:
        stops = list(data["stops"])
        counts = {}
        for o, row in zip(stops, data["counts"]):
            for d, v in zip(stops, row):
                if v:
                    counts[(o, d)] = int(v)
        return cls(
            stops=stops,
            counts=counts,
            unmatched_boardings=int(data.get("unmatched_boardings", 0)),
            unmatched_alightings=int(data.get("unmatched_alightings", 0)),
            same_stop_journeys=int(data.get("same_stop_journeys", 0)),
        )


def attribute_event_to_stop(
    event: RoiEvent, stops: Sequence[StopEvent], attach_slack: float = 10.0
) -> str | None:
    slack = attach_slack * 1000.0
    t = event.resolved_time
    hits = [s for s in stops if s.t_start - slack <= t <= s.t_end + slack]
    if not hits:
        return None
    return min(hits, key=lambda s: (abs(s.midpoint - t), s.t_start)).stop_id


def build_journeys(
    identity_events: Mapping[int, Sequence[RoiEvent]],
    stops: Sequence[StopEvent],
    attach_slack: float = 10.0,
) -> list[Journey]:
    """Fold each identity's attributed events into journeys.

    Journeys with no alighting are open boardings; journeys with no boarding
    record an alighting that could not be paired.
    """
    journeys: list[Journey] = []
    for gid in sorted(identity_events):
        events = sorted(identity_events[gid], key=RoiEvent.sort_key)
        board: tuple[str, int] | None = None
        alight: tuple[str, int] | None = None
        for e in events:
            stop = attribute_event_to_stop(e, stops, attach_slack)
            if stop is None:
                continue
            if e.direction is Direction.IN:
                if board is not None and alight is not None:
                    journeys.append(Journey(gid, board[0], alight[0], board[1], alight[1]))
                    board, alight = None, None
                if board is None:
                    board = (stop, e.resolved_time)
            elif board is not None:
                alight = (stop, e.resolved_time)
            else:
                journeys.append(Journey(gid, None, stop, None, e.resolved_time))
        if board is not None:
            if alight is not None:
                journeys.append(Journey(gid, board[0], alight[0], board[1], alight[1]))
            else:
                journeys.append(Journey(gid, board[0], None, board[1], None))
    return journeys


def stop_order(registry: StopRegistry, stop_events: Iterable[StopEvent] = (), extra: Iterable[str] = ()) -> list[str]:
    order = registry.ids()
    seen = set(order)
    for sid in [s.stop_id for s in sorted(stop_events, key=lambda s: s.t_start)] + list(extra):
        if sid not in seen:
            order.append(sid)
            seen.add(sid)
    return order


def build_matrix(
    journeys: Sequence[Journey],
    registry: StopRegistry,
    stop_events: Iterable[StopEvent] = (),
) -> OdMatrix:
    extra = []
    for j in journeys:
        extra += [s for s in (j.board_stop, j.alight_stop) if s is not None]
    od = OdMatrix(stops=stop_order(registry, stop_events, extra))
    for j in journeys:
        if j.complete:
            key = (j.board_stop, j.alight_stop)
            od.counts[key] = od.counts.get(key, 0) + 1
            if j.board_stop == j.alight_stop:
                od.same_stop_journeys += 1
        elif j.board_stop is not None:
            od.unmatched_boardings += 1
        elif j.alight_stop is not None:
            od.unmatched_alightings += 1
    return od
