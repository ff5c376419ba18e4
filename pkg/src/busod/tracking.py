"""Per-camera tracklets and identity repair across short occlusions.

The tracker is a deterministic IoU + appearance assignment tracker with a
constant-velocity box prediction. Identity repair runs after each frame and
stitches a lost tracklet to a newly born one when gates pass:

* ``ema``        - appearance (EMA embedding) and centre-distance gates
* ``door``       - gates widen while the door is open and both boxes touch the
                   door ROI; ambiguity and ownership guards veto risky merges
* ``door_traj``  - when the door region is crowded, the centre gate is taken
                   around a velocity prediction and candidates overlapping an
                   unrelated track are excluded
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from busod.assignment import solve_masked
from busod.errors import ConfigError, InputSchemaError
from busod.geometry import (
    BoundingBox,
    Point2,
    Roi,
    box_center,
    box_intersects_polygon,
    contains,
    distance,
    iou,
)
from busod.vectors import cosine_distance, cosine_distance_matrix, normalize


class DetectorKind(enum.Enum):
    FULL_BODY = "full_body"
    HEAD_ONLY = "head_only"


class TrackState(enum.Enum):
    ACTIVE = "active"
    LOST = "lost"
    CLOSED = "closed"


class RepairPolicy(enum.Enum):
    NONE = "none"
    EMA = "ema"
    DOOR_AWARE = "door"
    DOOR_AWARE_TRAJECTORY = "door_traj"


@dataclass(slots=True)
class Detection:
    camera_id: str
    frame_index: int
    box: BoundingBox
    confidence: float
    embedding: np.ndarray
    detector_kind: DetectorKind = DetectorKind.FULL_BODY
    time_ms: int | None = None

    @property
    def center(self) -> Point2:
        return box_center(self.box)


@dataclass
class Tracklet:
    local_id: int
    camera_id: str
    detections: list[Detection]
    ema_embedding: np.ndarray
    last_velocity: tuple[float, float] = (0.0, 0.0)
    state: TrackState = TrackState.ACTIVE
    stitched_from: list[int] = field(default_factory=list)

    @property
    def first_frame(self) -> int:
        return self.detections[0].frame_index

    @property
    def last_frame(self) -> int:
        return self.detections[-1].frame_index

    @property
    def first_box(self) -> BoundingBox:
        return self.detections[0].box

    @property
    def last_box(self) -> BoundingBox:
        return self.detections[-1].box

    @property
    def first_center(self) -> Point2:
        return box_center(self.detections[0].box)

    @property
    def last_center(self) -> Point2:
        return box_center(self.detections[-1].box)

    @property
    def t_start(self) -> int | None:
        return self.detections[0].time_ms

    @property
    def t_end(self) -> int | None:
        return self.detections[-1].time_ms

    def predicted_box(self, frame_index: int) -> BoundingBox:
        gap = frame_index - self.last_frame
        vx, vy = self.last_velocity
        return self.last_box.translated(vx * gap, vy * gap)

    def predicted_center(self, frame_index: int) -> Point2:
        gap = frame_index - self.last_frame
        c = self.last_center
        return Point2(c.x + self.last_velocity[0] * gap, c.y + self.last_velocity[1] * gap)


@dataclass(frozen=True)
class TrackerConfig:
    iou_gate: float = 0.1
    appearance_gate: float = 0.4
    max_lost_frames: int = 25
    ema_alpha: float = 0.1
    repair_policy: RepairPolicy = RepairPolicy.NONE
    stitch_window: int = 50
    stitch_center_gate: float = 80.0
    exclusion_iou: float = 0.5
    iou_weight: float = 0.5
    appearance_weight: float = 0.5
    door_appearance_widen: float = 1.5
    door_spatial_widen: float = 2.0
    ambiguity_margin: float = 0.05
    velocity_smoothing: float = 0.5

    def __post_init__(self) -> None:
        for name in ("iou_gate", "ema_alpha", "exclusion_iou", "velocity_smoothing"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"tracker.{name} must lie in [0, 1]")
        if not 0.0 <= self.appearance_gate <= 2.0:
            raise ConfigError("tracker.appearance_gate must lie in [0, 2]")
        if self.max_lost_frames < 0 or self.stitch_window < 0 or self.stitch_center_gate < 0:
            raise ConfigError("tracker frame windows and gates must be non-negative")
        if not isinstance(self.repair_policy, RepairPolicy):
            object.__setattr__(self, "repair_policy", RepairPolicy(self.repair_policy))


def _ema_update(old: np.ndarray, new: np.ndarray, alpha: float) -> np.ndarray:
    return normalize((1.0 - alpha) * old + alpha * normalize(new))


def _extend(track: Tracklet, det: Detection, cfg: TrackerConfig) -> None:
    prev = track.detections[-1]
    gap = det.frame_index - prev.frame_index
    c0, c1 = box_center(prev.box), box_center(det.box)
    inst = ((c1.x - c0.x) / gap, (c1.y - c0.y) / gap)
    if len(track.detections) == 1:
        track.last_velocity = inst
    else:
        s = cfg.velocity_smoothing
        vx, vy = track.last_velocity
        track.last_velocity = (s * vx + (1 - s) * inst[0], s * vy + (1 - s) * inst[1])
    track.detections.append(det)
    track.ema_embedding = _ema_update(track.ema_embedding, det.embedding, cfg.ema_alpha)


def association_costs(
    tracks: Sequence[Tracklet], dets: Sequence[Detection], cfg: TrackerConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Blended cost matrix and the gate mask for tracks x detections."""
    frame = dets[0].frame_index
    ious = np.array([[iou(t.predicted_box(frame), d.box) for d in dets] for t in tracks])
    app = cosine_distance_matrix(
        np.stack([t.ema_embedding for t in tracks]), np.stack([d.embedding for d in dets])
    )
    costs = cfg.iou_weight * (1.0 - ious) + cfg.appearance_weight * app
    allowed = (ious >= cfg.iou_gate) | (app <= cfg.appearance_gate)
    return costs, allowed


def step_tracker(
    active: Sequence[Tracklet],
    frame_dets: Sequence[Detection],
    cfg: TrackerConfig,
    ids: Iterator[int] | None = None,
    frame_index: int | None = None,
) -> tuple[list[Tracklet], list[Tracklet]]:
    """Advance the tracker by one frame.

    Returns ``(tracks, new_tracks)``: ``tracks`` are the input tracklets after
    matching (unmatched ones may have turned ``LOST``) and ``new_tracks`` are
    spawned from unmatched detections, with ids drawn from ``ids``. Pass
    ``frame_index`` so that tracks also age through empty frames.
    """
    if ids is None:
        ids = itertools.count(max((t.local_id for t in active), default=0) + 1)
    tracks = list(active)
    if frame_dets:
        frame = frame_dets[0].frame_index
        if frame_index is not None and frame != frame_index:
            raise InputSchemaError(f"detections of frame {frame} passed for frame {frame_index}")
        cam = frame_dets[0].camera_id
        dim = frame_dets[0].embedding.shape[0]
        for d in frame_dets:
            if d.frame_index != frame or d.camera_id != cam:
                raise InputSchemaError("step_tracker needs detections from one frame of one camera")
            if d.embedding.shape[0] != dim:
                raise InputSchemaError(f"embedding dimension drift at frame {frame}")
        for t in tracks:
            if t.ema_embedding.shape[0] != dim:
                raise InputSchemaError(
                    f"embedding dimension {dim} at frame {frame} does not match track {t.local_id}"
                )
    else:
        frame = frame_index

    candidates = [t for t in tracks if t.state is TrackState.ACTIVE]
    matched_dets: set[int] = set()
    matched_tracks: set[int] = set()
    if candidates and frame_dets:
        costs, allowed = association_costs(candidates, frame_dets, cfg)
        for ti, di in solve_masked(costs, allowed):
            _extend(candidates[ti], frame_dets[di], cfg)
            matched_tracks.add(ti)
            matched_dets.add(di)

    if frame is not None:
        for ti, t in enumerate(candidates):
            if ti not in matched_tracks and frame - t.last_frame > cfg.max_lost_frames:
                t.state = TrackState.LOST

    new_tracks = [
        Tracklet(
            local_id=next(ids),
            camera_id=d.camera_id,
            detections=[d],
            ema_embedding=normalize(d.embedding),
        )
        for di, d in enumerate(frame_dets)
        if di not in matched_dets
    ]
    return tracks, new_tracks


# ---------------------------------------------------------------------------
# identity repair


def _base_gates(cfg: TrackerConfig) -> tuple[float, float]:
    return cfg.appearance_gate, cfg.stitch_center_gate


def repair_ema(lost: Tracklet, candidates: Sequence[Tracklet], cfg: TrackerConfig) -> Tracklet | None:
    best_key = None
    best = None
    for c in candidates:
        app = cosine_distance(lost.ema_embedding, c.ema_embedding)
        dist = distance(lost.last_center, c.first_center)
        if app > cfg.appearance_gate or dist > cfg.stitch_center_gate:
            continue
        key = (app, dist, c.local_id)
        if best_key is None or key < best_key:
            best_key, best = key, c
    return best


def _door_context(lost: Tracklet, cand: Tracklet, door: Roi | None, door_open: bool) -> bool:
    return (
        door is not None
        and door_open
        and box_intersects_polygon(lost.last_box, door.polygon)
        and box_intersects_polygon(cand.first_box, door.polygon)
    )


def _pick_guarded(scored: list[tuple[float, float, int, Tracklet]], margin: float) -> Tracklet | None:
    if not scored:
        return None
    scored.sort(key=lambda s: s[:3])
    if len(scored) > 1 and scored[1][0] - scored[0][0] < margin:
        return None
    return scored[0][3]


def repair_door_aware(
    lost: Tracklet,
    candidates: Sequence[Tracklet],
    door: Roi | None,
    door_open: bool,
    cfg: TrackerConfig,
    claimed: Iterable[int] = (),
) -> Tracklet | None:
    claimed = set(claimed)
    scored = []
    for c in candidates:
        if c.local_id in claimed:
            continue
        app_gate, center_gate = _base_gates(cfg)
        if _door_context(lost, c, door, door_open):
            app_gate *= cfg.door_appearance_widen
            center_gate *= cfg.door_spatial_widen
        app = cosine_distance(lost.ema_embedding, c.ema_embedding)
        dist = distance(lost.last_center, c.first_center)
        if app <= app_gate and dist <= center_gate:
            scored.append((app, dist, c.local_id, c))
    return _pick_guarded(scored, cfg.ambiguity_margin)


def repair_trajectory(
    lost: Tracklet,
    candidates: Sequence[Tracklet],
    door: Roi | None,
    door_open: bool,
    cfg: TrackerConfig,
    claimed: Iterable[int] = (),
    boxes_at: Callable[[int], Sequence[tuple[Tracklet, BoundingBox]]] | None = None,
    occupancy: int | None = None,
    density_threshold: int = 5,
) -> Tracklet | None:
    """Door-aware repair with the spatial gate centred on a motion prediction.

    ``boxes_at(frame)`` lists ``(tracklet, box)`` for every track observed at
    that frame; a candidate whose first box overlaps an unrelated one above
    ``exclusion_iou`` is rejected. Below ``density_threshold`` occupancy this
    falls back to plain door-aware repair.
    """
    if occupancy is not None and occupancy < density_threshold:
        return repair_door_aware(lost, candidates, door, door_open, cfg, claimed)
    claimed = set(claimed)
    scored = []
    for c in candidates:
        if c.local_id in claimed:
            continue
        predicted = lost.predicted_center(c.first_frame)
        deviation = distance(predicted, c.first_center)
        if deviation > cfg.stitch_center_gate:
            continue
        if boxes_at is not None and any(
            other is not lost and other is not c and iou(box, c.first_box) > cfg.exclusion_iou
            for other, box in boxes_at(c.first_frame)
        ):
            continue
        app_gate = cfg.appearance_gate
        if _door_context(lost, c, door, door_open):
            app_gate *= cfg.door_appearance_widen
        app = cosine_distance(lost.ema_embedding, c.ema_embedding)
        if app <= app_gate:
            scored.append((app, deviation, c.local_id, c))
    return _pick_guarded(scored, cfg.ambiguity_margin)


def stitch(into: Tracklet, other: Tracklet, cfg: TrackerConfig) -> None:
    """Append ``other`` onto ``into``; the older id survives."""
    for det in other.detections:
        into.detections.append(det)
        into.ema_embedding = _ema_update(into.ema_embedding, det.embedding, cfg.ema_alpha)
    into.last_velocity = other.last_velocity
    into.stitched_from.append(other.local_id)
    into.stitched_from.extend(other.stitched_from)
    into.state = other.state


class Tracker:
    """Stateful driver for one camera: association, then repair, per frame."""

    def __init__(
        self,
        camera_id: str,
        cfg: TrackerConfig,
        roi: Roi | None = None,
        density_threshold: int = 5,
    ) -> None:
        self.camera_id = camera_id
        self.cfg = cfg
        self.roi = roi
        self.density_threshold = density_threshold
        self._ids = itertools.count(1)
        self.tracks: list[Tracklet] = []
        self.closed: list[Tracklet] = []
        self._frame_boxes: dict[int, list[tuple[Tracklet, BoundingBox]]] = {}
        self.stitches: list[dict] = []

    def occupancy(self, dets: Sequence[Detection]) -> int:
        if self.roi is None:
            return 0
        return sum(contains(self.roi.polygon, d.center) for d in dets)

    def step(self, frame_index: int, dets: Sequence[Detection], door_open: bool = False) -> int:
        """Process one frame; returns the door-ROI occupancy of that frame."""
        tracks, new = step_tracker(self.tracks, dets, self.cfg, self._ids, frame_index)
        self.tracks = tracks + new
        observed = [(t, t.last_box) for t in self.tracks if t.last_frame == frame_index]
        if observed:
            self._frame_boxes[frame_index] = observed
        occ = self.occupancy(dets)
        if self.cfg.repair_policy is not RepairPolicy.NONE:
            self._repair(frame_index, door_open, occ)
        self._expire(frame_index)
        return occ

    def _boxes_at(self, frame: int) -> list[tuple[Tracklet, BoundingBox]]:
        return self._frame_boxes.get(frame, [])

    def _repair(self, frame: int, door_open: bool, occupancy: int) -> None:
        cfg = self.cfg
        lost = sorted((t for t in self.tracks if t.state is TrackState.LOST), key=lambda t: t.local_id)
        claimed: set[int] = set()
        for trk in lost:
            cands = [
                c
                for c in self.tracks
                if c.state is TrackState.ACTIVE
                and c is not trk
                and 0 < c.first_frame - trk.last_frame <= cfg.stitch_window
            ]
            if not cands:
                continue
            policy = cfg.repair_policy
            if policy is RepairPolicy.EMA:
                choice = repair_ema(trk, cands, cfg)
            elif policy is RepairPolicy.DOOR_AWARE:
                choice = repair_door_aware(trk, cands, self.roi, door_open, cfg, claimed)
            else:
                choice = repair_trajectory(
                    trk, cands, self.roi, door_open, cfg, claimed,
                    boxes_at=self._boxes_at,
                    occupancy=occupancy,
                    density_threshold=self.density_threshold,
                )
            if choice is None or choice.local_id in claimed:
                continue
            claimed.add(choice.local_id)
            self.stitches.append(
                {"frame": frame, "kept": trk.local_id, "absorbed": choice.local_id, "policy": policy.value}
            )
            stitch(trk, choice, cfg)
            self.tracks.remove(choice)

    def _expire(self, frame: int) -> None:
        keep = []
        horizon = self.cfg.stitch_window + self.cfg.max_lost_frames
        for t in self.tracks:
            if t.state is TrackState.LOST and frame - t.last_frame > self.cfg.stitch_window:
                t.state = TrackState.CLOSED
                self.closed.append(t)
            else:
                keep.append(t)
        self.tracks = keep
        stale = [f for f in self._frame_boxes if frame - f > horizon]
        for f in stale:
            del self._frame_boxes[f]

    def finish(self) -> list[Tracklet]:
        for t in self.tracks:
            t.state = TrackState.CLOSED
        out = sorted(self.closed + self.tracks, key=lambda t: t.local_id)
        self.tracks, self.closed = [], []
        return out


def run_tracker(
    frames: Iterable[tuple[int, Sequence[Detection], bool]],
    camera_id: str,
    cfg: TrackerConfig,
    roi: Roi | None = None,
    density_threshold: int = 5,
) -> tuple[list[Tracklet], dict[int, int], list[dict]]:
    """Drive a tracker over ``(frame_index, detections, door_open)`` triples.

    Returns closed tracklets, per-frame occupancy and the stitch log.
    """
    tracker = Tracker(camera_id, cfg, roi, density_threshold)
    occupancy: dict[int, int] = {}
    for frame_index, dets, door_open in frames:
        occupancy[frame_index] = tracker.step(frame_index, dets, door_open)
    return tracker.finish(), occupancy, tracker.stitches
