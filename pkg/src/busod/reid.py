"""Cross-camera association of tracklets into global passenger identities.

Tracklets from the front camera (rows) and the exit camera (columns) are
compared by cosine distance of their EMA embeddings; a gated minimum-cost
matching links them. Anything left unmatched becomes a singleton identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from busod.assignment import solve_assignment, solve_masked
from busod.counting import Direction, RoiEvent
from busod.errors import ConfigError
from busod.tracking import Tracklet
from busod.vectors import cosine_distance, cosine_distance_matrix, normalize

__all__ = [
    "CostMatrix",
    "GlobalIdentity",
    "ReidConfig",
    "associate_cameras",
    "build_cost_matrix",
    "cosine_distance",
    "dedupe_events",
    "solve_assignment",
]


@dataclass(frozen=True)
class ReidConfig:
    tau_reid: float = 0.6
    time_overlap_slack: float = 120.0
    in_camera: str = "A"
    out_camera: str = "B"

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau_reid <= 2.0:
            raise ConfigError("reid.tau_reid must lie in [0, 2]")
        if self.time_overlap_slack < 0:
            raise ConfigError("reid.time_overlap_slack must be non-negative")


@dataclass
class CostMatrix:
    rows: list[int]
    cols: list[int]
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise ValueError("cost matrix shape does not match its labels")


@dataclass
class GlobalIdentity:
    global_id: int
    members: dict[str, int]
    embedding: np.ndarray
    t_start: int | None = None
    match_cost: float | None = None
    tracklets: dict[str, Tracklet] = field(default_factory=dict, repr=False)


def build_cost_matrix(a: Sequence[Tracklet], b: Sequence[Tracklet]) -> CostMatrix:
    rows = sorted(a, key=lambda t: t.local_id)
    cols = sorted(b, key=lambda t: t.local_id)
    if rows and cols:
        values = cosine_distance_matrix(
            np.stack([t.ema_embedding for t in rows]), np.stack([t.ema_embedding for t in cols])
        )
    else:
        values = np.zeros((len(rows), len(cols)))
    return CostMatrix([t.local_id for t in rows], [t.local_id for t in cols], values)


def time_compatible(t1: Tracklet, t2: Tracklet, slack_s: float) -> bool:
    if None in (t1.t_start, t1.t_end, t2.t_start, t2.t_end):
        return True
    gap = max(t1.t_start, t2.t_start) - min(t1.t_end, t2.t_end)
    return gap <= slack_s * 1000.0


def associate_cameras(
    a: Sequence[Tracklet], b: Sequence[Tracklet], cfg: ReidConfig
) -> list[GlobalIdentity]:
    rows = sorted(a, key=lambda t: t.local_id)
    cols = sorted(b, key=lambda t: t.local_id)
    costs = build_cost_matrix(rows, cols).values
    allowed = np.zeros(costs.shape, dtype=bool)
    for i, ta in enumerate(rows):
        for j, tb in enumerate(cols):
            allowed[i, j] = costs[i, j] <= cfg.tau_reid and time_compatible(
                ta, tb, cfg.time_overlap_slack
            )
    pairs = solve_masked(costs, allowed) if allowed.any() else []

    groups: list[tuple[list[Tracklet], float | None]] = []
    used_a, used_b = set(), set()
    for i, j in pairs:
        groups.append(([rows[i], cols[j]], float(costs[i, j])))
        used_a.add(i)
        used_b.add(j)
    groups += [([t], None) for i, t in enumerate(rows) if i not in used_a]
    groups += [([t], None) for j, t in enumerate(cols) if j not in used_b]

    def order(g: tuple[list[Tracklet], float | None]) -> tuple:
        members = g[0]
        start = min((m.t_start for m in members if m.t_start is not None), default=0)
        first = min(members, key=lambda m: (m.camera_id, m.local_id))
        return (start, first.camera_id, first.local_id)

    identities = []
    for gid, (members, cost) in enumerate(sorted(groups, key=order), start=1):
        emb = normalize(np.mean([normalize(m.ema_embedding) for m in members], axis=0))
        starts = [m.t_start for m in members if m.t_start is not None]
        identities.append(
            GlobalIdentity(
                global_id=gid,
                members={m.camera_id: m.local_id for m in members},
                embedding=emb,
                t_start=min(starts) if starts else None,
                match_cost=cost,
                tracklets={m.camera_id: m for m in members},
            )
        )
    return identities


def dedupe_events(
    identity: GlobalIdentity,
    events: Sequence[RoiEvent],
    window_s: float = 3.0,
    in_camera: str = "A",
    out_camera: str = "B",
) -> list[RoiEvent]:
    """Drop a non-owner camera's event when the owner saw the same move nearby.

    The front camera owns boardings (IN) and the exit camera owns alightings
    (OUT).
    """
    window = window_s * 1000.0
    owner = {Direction.IN: in_camera, Direction.OUT: out_camera}
    evs = sorted(events, key=RoiEvent.sort_key)
    kept = []
    for e in evs:
        own = owner[e.direction]
        if e.camera_id != own and any(
            o.camera_id == own
            and o.direction is e.direction
            and abs(o.resolved_time - e.resolved_time) <= window
            for o in evs
        ):
            continue
        kept.append(e)
    return kept
