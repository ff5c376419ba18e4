"""Synthetic bus scenarios with exact ground truth.

People are boxes moving along piecewise-linear vertical paths in a fixed
640x480 frame: queue region, door line, interior (boarding) or the reverse
(alighting). Appearance is a latent unit vector per person, observed with
gaussian noise and, after a modality shift, through a fixed rotation. The
bus follows a trapezoidal speed profile between halts.

Everything is driven by ``ScenarioConfig.seed``; two runs with the same
config produce byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from busod.config import default_sections, dump_yaml, roi_to_dict
from busod.errors import ConfigError
from busod.geometry import DoorLine, Point2, Roi, Side, signed_distance
from busod.odmatrix import Journey, OdMatrix, build_matrix
from busod.telematics import Stop, StopEvent, StopKind, StopRegistry
from busod.timeline import DEFAULT_FORMAT, format_overlay, frame_offset_ms, parse_overlay

FRAME_W, FRAME_H = 640, 480
BODY_W, BODY_H = 60.0, 150.0
HEAD_SIZE = 30.0
HEAD_OFFSET = 55.0  # head centre sits this far above the body centre

LINE_Y = 240.0
QUEUE_Y = 140.0
SPAWN_Y = 60.0
INTERIOR_Y = 440.0
EXIT_Y = 40.0
LANES = (220.0, 320.0, 420.0)

ROI = Roi(
    polygon=(Point2(140, 180), Point2(500, 180), Point2(500, 300), Point2(140, 300)),
    door_line=DoorLine(Point2(160, LINE_Y), Point2(480, LINE_Y), Side.POSITIVE),
    queue_region=(Point2(140, 100), Point2(500, 100), Point2(500, 178), Point2(140, 178)),
)
CAMERA_DOORS = {"A": "front", "B": "rear"}

CRUISE_MS = 8.0  # m/s
CRAWL_KMH = 3.0
ORIGIN = (-1.9441, 30.0619)
DOOR_LEAD_S = 1.0
FIRST_CROSSING_S = 1.5
MIN_ILLEGAL_DISTANCE_M = 150.0

DOOR_USAGE = {
    "standard": ("A", "B"),
    "reverse": ("B", "A"),
    "front_only": ("A", "A"),
    "rear_only": ("B", "B"),
}


@dataclass(frozen=True)
class RouteStop:
    stop_id: str
    arrival_s: float
    dwell_s: float
    name: str = ""


@dataclass(frozen=True)
class PassengerSpec:
    board_stop: str
    alight_stop: str
    door_usage: str = "standard"


@dataclass(frozen=True)
class IllegalStopSpec:
    """A halt (``mode='halt'``) or open-door crawl inserted after ``after_stop``."""

    after_stop: str
    offset_s: float
    duration_s: float
    mode: str = "halt"


@dataclass(frozen=True)
class Stressors:
    crowding_level: int = 0
    occlusion_gap_frames: tuple[int, ...] = ()
    occlusion_fraction: float = 1.0
    modality_shift_times: tuple[float, ...] = ()
    loiterer_count: int = 0
    illegal_stop_specs: tuple[IllegalStopSpec, ...] = ()
    embedding_noise_sigma: float = 0.0
    uniform_similarity: float = 0.0
    full_body_miss_rate: float = 0.0
    head_stream: bool = False
    ocr_error_rate: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    fps: int = 25
    duration_s: float = 600.0
    route: tuple[RouteStop, ...] = ()
    passengers: tuple[PassengerSpec, ...] = ()
    stressors: Stressors = Stressors()
    embedding_dim: int = 64
    min_separation: float = 0.8
    walk_speed: float = 150.0  # px/s
    crossing_spacing_s: float = 3.0
    queue_wait_s: float = 1.0
    start_time: str = "2025-03-26 07:00:00"
    name: str = "scenario"

    def with_seed(self, seed: int) -> ScenarioConfig:
        return dataclasses.replace(self, seed=seed)


def scenario_from_dict(d: Mapping[str, Any]) -> ScenarioConfig:
    d = dict(d)
    names = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
    try:
        d["route"] = tuple(RouteStop(**r) for r in d.get("route", ()))
        d["passengers"] = tuple(PassengerSpec(**p) for p in d.get("passengers", ()))
        s = dict(d.get("stressors") or {})
        s["illegal_stop_specs"] = tuple(IllegalStopSpec(**x) for x in s.get("illegal_stop_specs", ()))
        for key in ("occlusion_gap_frames", "modality_shift_times"):
            s[key] = tuple(s.get(key, ()))
        d["stressors"] = Stressors(**s)
        return ScenarioConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    def plain(x):
        if isinstance(x, (list, tuple)):
            return [plain(v) for v in x]
        if isinstance(x, dict):
            return {k: plain(v) for k, v in x.items()}
        return x

    return plain(dataclasses.asdict(cfg))


# --- schedule ---------------------------------------------------------------


@dataclass
class _Halt:
    stop_id: str
    start: float
    end: float
    mode: str  # official | halt | crawl
    door_open: float = 0.0
    door_close: float = 0.0
    position: float = 0.0

    @property
    def official(self) -> bool:
        return self.mode == "official"


def _schedule(cfg: ScenarioConfig) -> list[_Halt]:
    if not cfg.route:
        raise ConfigError("scenario needs at least one route stop")
    ids = [r.stop_id for r in cfg.route]
    if len(set(ids)) != len(ids):
        raise ConfigError("route stop ids must be unique")
    halts = []
    prev_end = 0.0
    for r in cfg.route:
        if r.dwell_s <= 2 * DOOR_LEAD_S:
            raise ConfigError(f"stop {r.stop_id}: dwell must exceed {2 * DOOR_LEAD_S} s")
        if r.arrival_s < prev_end + 20 and halts:
            raise ConfigError("route arrivals must increase with at least 20 s of travel")
        if r.arrival_s < 5:
            raise ConfigError("arrival times must be at least 5 s into the scenario")
        halts.append(_Halt(r.stop_id, r.arrival_s, r.arrival_s + r.dwell_s, "official"))
        prev_end = r.arrival_s + r.dwell_s
    if prev_end > cfg.duration_s:
        raise ConfigError("route does not fit in the scenario duration")

    extra = []
    by_id = {h.stop_id: h for h in halts}
    for spec in cfg.stressors.illegal_stop_specs:
        if spec.mode not in ("halt", "crawl"):
            raise ConfigError(f"illegal stop mode must be halt or crawl, got {spec.mode!r}")
        if spec.after_stop not in by_id:
            raise ConfigError(f"illegal stop refers to unknown stop {spec.after_stop!r}")
        start = by_id[spec.after_stop].end + spec.offset_s
        extra.append(_Halt("", start, start + spec.duration_s, spec.mode))
    halts = sorted(halts + extra, key=lambda h: h.start)
    for a, b in zip(halts, halts[1:]):
        if b.start - a.end < 20:
            raise ConfigError("halts must be separated by at least 20 s of travel")
    if halts[-1].end > cfg.duration_s:
        raise ConfigError("an illegal stop runs past the scenario end")
    n = 0
    for h in halts:
        if not h.official:
            n += 1
            h.stop_id = f"ILLEGAL-{n}"
        h.door_open = h.start + DOOR_LEAD_S
        h.door_close = h.end - DOOR_LEAD_S
    return halts


def _speed_knots(halts: Sequence[_Halt], duration: float) -> tuple[np.ndarray, np.ndarray]:
    crawl = CRAWL_KMH / 3.6
    ts, vs = [0.0], [CRUISE_MS]
    prev_end = 0.0
    for i, h in enumerate(halts):
        u = crawl if h.mode == "crawl" else 0.0
        gap = h.start - prev_end
        r = min(10.0, gap / 3.0)
        if i > 0:
            ts.append(prev_end + r)
            vs.append(CRUISE_MS)
        ts += [h.start - r, h.start, h.end]
        vs += [CRUISE_MS, u, u]
        prev_end = h.end
    r = min(10.0, max(duration - prev_end, 1e-3) / 3.0)
    ts += [prev_end + r, max(duration, prev_end + r) + 1.0]
    vs += [CRUISE_MS, CRUISE_MS]
    return np.asarray(ts), np.asarray(vs)


def _distance_at(kt: np.ndarray, kv: np.ndarray, t: float) -> float:
    seg = np.diff(kt) * (kv[1:] + kv[:-1]) / 2.0
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    i = int(np.clip(np.searchsorted(kt, t, side="right") - 1, 0, len(kt) - 2))
    v_t = float(np.interp(t, kt, kv))
    return float(cum[i] + (t - kt[i]) * (kv[i] + v_t) / 2.0)


def _latlon(dist_m: float) -> tuple[float, float]:
    lat0, lon0 = ORIGIN
    dlon = math.degrees(dist_m / (6371008.8 * math.cos(math.radians(lat0))))
    return round(lat0, 7), round(lon0 + dlon, 7)


# --- people -----------------------------------------------------------------


@dataclass
class _Appearance:
    person: str
    camera: str
    lane: float
    keys: list[tuple[float, float]]  # (t, y)
    crossing: float | None = None  # scheduled crossing time, passengers only
    direction: str | None = None
    stop_id: str | None = None
    occlusion: int = 0
    crossing_frame: int | None = None

    @property
    def t0(self) -> float:
        return self.keys[0][0]

    @property
    def t1(self) -> float:
        return self.keys[-1][0]

    def y_at(self, t: float) -> float:
        ts = [k[0] for k in self.keys]
        ys = [k[1] for k in self.keys]
        return float(np.interp(t, ts, ys))


def _boarding_path(tc: float, w: float, wait: float) -> list[tuple[float, float]]:
    t3 = tc - (LINE_Y - QUEUE_Y) / w
    t2 = t3 - wait
    t1 = t2 - (QUEUE_Y - SPAWN_Y) / w
    t4 = tc + (INTERIOR_Y - LINE_Y) / w
    return [(t1, SPAWN_Y), (t2, QUEUE_Y), (t3, QUEUE_Y), (tc, LINE_Y), (t4, INTERIOR_Y)]


def _alighting_path(tc: float, w: float) -> list[tuple[float, float]]:
    t0 = tc - (INTERIOR_Y - LINE_Y) / w
    t2 = tc + (LINE_Y - QUEUE_Y) / w
    t3 = t2 + (QUEUE_Y - EXIT_Y) / w
    return [(t0, INTERIOR_Y), (tc, LINE_Y), (t2, QUEUE_Y), (t3, EXIT_Y)]


def _loiter_path(t: float, w: float, swings: int = 2) -> list[tuple[float, float]]:
    keys = [(t, INTERIOR_Y)]
    t += (INTERIOR_Y - 290.0) / w
    keys.append((t, 290.0))
    for _ in range(swings):
        for y in (190.0, 290.0):
            t += 1.0
            keys.append((t, keys[-1][1]))
            t += 100.0 / w
            keys.append((t, y))
    t += 1.0
    keys.append((t, 290.0))
    t += (INTERIOR_Y - 290.0) / w
    keys.append((t, INTERIOR_Y))
    return keys


def _latents(n: int, dim: int, cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    u = cfg.stressors.uniform_similarity
    if not 0.0 <= u < 1.0:
        raise ConfigError("uniform_similarity must lie in [0, 1)")
    shared = rng.standard_normal(dim)
    shared /= np.linalg.norm(shared)
    out: list[np.ndarray] = []
    for _ in range(n):
        for _attempt in range(10_000):
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            if u > 0:
                v = u * shared + math.sqrt(1 - u * u) * v
                v /= np.linalg.norm(v)
                break
            if all(1.0 - float(v @ o) >= cfg.min_separation for o in out):
                break
        else:
            raise ConfigError("cannot draw latents with the requested separation")
        out.append(v)
    return np.array(out).reshape(n, dim)


def _rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


# --- ground truth -----------------------------------------------------------


@dataclass
class GroundTruth:
    journeys: list[dict]
    events: list[dict]
    door_counts: dict[str, dict[str, int]]
    per_second: dict[str, dict[str, list[int]]]
    identity_map: dict[str, dict[str, list[list]]]
    od: dict
    stops: list[dict]
    roles: dict[str, str]
    cameras: dict[str, dict]
    fps: int
    start_ms: int

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: Mapping) -> GroundTruth:
        return cls(**{f.name: d.get(f.name) for f in dataclasses.fields(cls)})

    def od_matrix(self) -> OdMatrix:
        return OdMatrix.from_json(self.od)

    def mot_truth(self) -> dict:
        """Identity map in the shape ``evaluation.mot_metrics`` expects."""
        out: dict = {}
        for cam, frames in (self.identity_map or {}).items():
            out[cam] = {
                int(f): [(row[0], tuple(row[1:5])) for row in rows] for f, rows in frames.items()
            }
        return out


@dataclass
class Scenario:
    config: ScenarioConfig
    logs: dict[str, str]
    door_csv: str
    telematics_csv: str
    stops_csv: str
    truth: GroundTruth

    def truth_text(self) -> str:
        return json.dumps(self.truth.to_json(), sort_keys=True, separators=(",", ":"))

    def pipeline_config(self, **overrides: Any) -> dict:
        sections = default_sections()
        sections["reid"]["time_overlap_slack"] = float(self.config.duration_s)
        cams = {}
        for cam, door in CAMERA_DOORS.items():
            cams[cam] = {
                "fps": self.config.fps,
                "door_id": door,
                "segment_id": self.config.name,
                "roi": roi_to_dict(ROI),
                "head_offset": [0.0, HEAD_OFFSET],
            }
        cfg = {
            "inputs": {
                "cam_a_log": "cam_A.jsonl",
                "cam_b_log": "cam_B.jsonl",
                "door_csv": "doors.csv",
                "telematics_csv": "telematics.csv",
                "stop_registry": "stops.csv",
            },
            "cameras": cams,
            "output_dir": "out",
            **sections,
        }
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key] = {**cfg[key], **value}
            else:
                cfg[key] = value
        return cfg

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "cam_A.jsonl": self.logs["A"],
            "cam_B.jsonl": self.logs["B"],
            "doors.csv": self.door_csv,
            "telematics.csv": self.telematics_csv,
            "stops.csv": self.stops_csv,
            "truth.json": self.truth_text() + "\n",
            "scenario.json": json.dumps(scenario_to_dict(self.config), sort_keys=True, indent=1) + "\n",
        }
        paths = {}
        for name, text in files.items():
            (out / name).write_text(text)
            paths[name] = out / name
        dump_yaml(self.pipeline_config(), out / "pipeline.yaml")
        paths["pipeline.yaml"] = out / "pipeline.yaml"
        return paths


def _csv(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _box(x: float, y: float, head: bool = False) -> tuple[float, float, float, float]:
    if head:
        cy = y - HEAD_OFFSET
        return (round(x - HEAD_SIZE / 2, 2), round(cy - HEAD_SIZE / 2, 2), HEAD_SIZE, HEAD_SIZE)
    return (round(x - BODY_W / 2, 2), round(y - BODY_H / 2, 2), BODY_W, BODY_H)


def _side(box: Sequence[float]) -> int:
    c = Point2(box[0] + box[2] / 2.0, box[1] + box[3] / 2.0)
    return 1 if signed_distance(c, ROI.door_line) > 0 else -1


def _corrupt(s: str, rng: np.random.Generator) -> str:
    digits = [i for i, ch in enumerate(s) if ch.isdigit()]
    i = digits[int(rng.integers(len(digits)))]
    return s[:i] + "X" + s[i + 1:]


def generate(cfg: ScenarioConfig) -> Scenario:
    """Build logs, door and telematics streams and ground truth for ``cfg``."""
    st = cfg.stressors
    if cfg.fps <= 0 or cfg.duration_s <= 0 or cfg.embedding_dim < 2:
        raise ConfigError("fps, duration_s and embedding_dim must be positive")
    if cfg.walk_speed <= 0 or cfg.crossing_spacing_s <= 0:
        raise ConfigError("walk_speed and crossing_spacing_s must be positive")
    if not 0.0 <= st.full_body_miss_rate < 1.0 or not 0.0 <= st.ocr_error_rate < 1.0:
        raise ConfigError("rates must lie in [0, 1)")
    if any(g <= 0 for g in st.occlusion_gap_frames):
        raise ConfigError("occlusion gaps must be positive")
    try:
        start_ms = parse_overlay(cfg.start_time, DEFAULT_FORMAT)
    except Exception as exc:
        raise ConfigError(f"bad start_time {cfg.start_time!r}") from exc

    halts = _schedule(cfg)
    halt_by_id = {h.stop_id: h for h in halts}
    order = {h.stop_id: i for i, h in enumerate(halts)}
    kt, kv = _speed_knots(halts, cfg.duration_s)
    for h in halts:
        h.position = _distance_at(kt, kv, h.start)
    official = [h for h in halts if h.official]
    for h in halts:
        if not h.official:
            near = min(abs(h.position - o.position) for o in official)
            if near < MIN_ILLEGAL_DISTANCE_M:
                raise ConfigError(f"{h.stop_id} lies {near:.0f} m from a registered stop")

    # passengers: validate and group actions per (halt, camera)
    actions: dict[tuple[str, str], list[tuple[str, str]]] = defaultdict(list)  # -> [(kind, pid)]
    n_pass = len(cfg.passengers)
    pids = [f"p{i + 1:03d}" for i in range(n_pass)]
    for pid, p in zip(pids, cfg.passengers):
        for s in (p.board_stop, p.alight_stop):
            if s not in halt_by_id:
                raise ConfigError(f"passenger {pid}: unknown stop {s!r}")
        if order[p.alight_stop] <= order[p.board_stop]:
            raise ConfigError(f"passenger {pid}: alights at or before boarding stop")
        if p.door_usage not in DOOR_USAGE:
            raise ConfigError(f"passenger {pid}: unknown door usage {p.door_usage!r}")
        cam_in, cam_out = DOOR_USAGE[p.door_usage]
        actions[(p.alight_stop, cam_out)].append(("out", pid))
        actions[(p.board_stop, cam_in)].append(("in", pid))

    w = cfg.walk_speed
    apps: list[_Appearance] = []
    journey_times: dict[str, dict[str, float]] = defaultdict(dict)
    for (stop_id, cam), acts in actions.items():
        h = halt_by_id[stop_id]
        acts = sorted(acts, key=lambda a: (a[0] != "out", a[1]))
        for k, (kind, pid) in enumerate(acts):
            tc = h.door_open + FIRST_CROSSING_S + k * cfg.crossing_spacing_s
            if tc > h.door_close - 0.5:
                raise ConfigError(f"stop {stop_id}: dwell too short for {len(acts)} crossings at one door")
            keys = _boarding_path(tc, w, cfg.queue_wait_s) if kind == "in" else _alighting_path(tc, w)
            apps.append(_Appearance(pid, cam, LANES[k % len(LANES)], keys, tc, kind, stop_id))
            journey_times[pid][kind] = tc

    roles = {pid: "passenger" for pid in pids}
    # loiterers: rear camera, longest legs, door closed
    legs = sorted(
        ((b.start - a.end, a.end, b.start) for a, b in zip(halts, halts[1:])), reverse=True
    )
    if st.loiterer_count:
        if not legs:
            raise ConfigError("loiterers need at least two halts")
        span = _loiter_path(0.0, w)[-1][0] + 1.0
        _, leg_start, leg_end = legs[0]
        t = leg_start + 10.0
        for i in range(st.loiterer_count):
            if t + span > leg_end - 10.0:
                raise ConfigError("too many loiterers for the longest travel leg")
            lid = f"l{i + 1:02d}"
            roles[lid] = "loiterer"
            apps.append(_Appearance(lid, "B", LANES[i % len(LANES)], _loiter_path(t, w)))
            t += span

    # bystanders: crowding inside the ROI during each official dwell
    if st.crowding_level:
        xs = [170.0, 270.0, 370.0, 470.0]
        for h in official:
            for cam in ("A", "B"):
                for j in range(st.crowding_level):
                    bid = f"b{order[h.stop_id] + 1:02d}{cam}{j + 1:02d}"
                    roles[bid] = "bystander"
                    y = 275.0 if j < len(xs) else 205.0
                    x = xs[j % len(xs)]
                    apps.append(_Appearance(bid, cam, x, [(h.start, y), (h.end, y)]))

    people = sorted(roles)
    rng_lat = np.random.default_rng([cfg.seed, 1])
    latents = dict(zip(people, _latents(len(people), cfg.embedding_dim, cfg, rng_lat)))
    rot = _rotation(cfg.embedding_dim, np.random.default_rng([cfg.seed, 6]))
    shifts = sorted(st.modality_shift_times)

    # occlusion: chosen passenger crossings lose a span of frames around the line
    rng_occ = np.random.default_rng([cfg.seed, 3])
    if st.occlusion_gap_frames:
        crossing_apps = sorted(
            (a for a in apps if a.crossing is not None), key=lambda a: (a.crossing, a.camera)
        )
        for k, a in enumerate(crossing_apps):
            if rng_occ.random() < st.occlusion_fraction:
                a.occlusion = st.occlusion_gap_frames[k % len(st.occlusion_gap_frames)]

    fps = cfg.fps
    n_frames = int(round(cfg.duration_s * fps))
    frame_ms = [start_ms + frame_offset_ms(f, fps) for f in range(n_frames)]

    # frame -> visible appearances per camera
    visible: dict[str, dict[int, list[_Appearance]]] = {"A": defaultdict(list), "B": defaultdict(list)}
    for a in apps:
        f0 = max(0, math.ceil(a.t0 * fps - 1e-9))
        f1 = min(n_frames - 1, math.floor(a.t1 * fps + 1e-9))
        for f in range(f0, f1 + 1):
            visible[a.camera][f].append(a)

    # crossing frames and occlusion spans from the rounded geometry
    truth_events = []
    hidden: dict[int, set[int]] = {}  # id(app) -> frames
    for a in apps:
        if a.crossing is None:
            continue
        frames = [f for f in range(max(0, math.ceil(a.t0 * fps - 1e-9)), n_frames) if f / fps <= a.t1 + 1e-9]
        sides = [_side(_box(a.lane, a.y_at(f / fps))) for f in frames]
        cf = next((f for f, s0, s1 in zip(frames[1:], sides, sides[1:]) if s1 != s0), None)
        if cf is None:
            raise ConfigError(f"{a.person}: crossing falls outside the scenario")
        if a.occlusion:
            lo = cf - a.occlusion // 2
            hidden[id(a)] = set(range(lo, lo + a.occlusion))
        a.crossing_frame = cf

    rng_noise = np.random.default_rng([cfg.seed, 2])
    rng_drop = np.random.default_rng([cfg.seed, 4])
    rng_ocr = np.random.default_rng([cfg.seed, 5])
    sigma = st.embedding_noise_sigma
    logs: dict[str, str] = {}
    identity: dict[str, dict[str, list[list]]] = {}
    crowd_threshold = 5
    for cam in ("A", "B"):
        lines: list[str] = []
        idmap: dict[str, list[list]] = {}
        for f in range(n_frames):
            t = f / fps
            ts = format_overlay(frame_ms[f] - frame_ms[f] % 1000)
            if st.ocr_error_rate and rng_ocr.random() < st.ocr_error_rate:
                ts = _corrupt(ts, rng_ocr)
            rotated = sum(1 for s in shifts if s <= t) % 2 == 1
            here = sorted(visible[cam].get(f, ()), key=lambda a: a.person)
            bodies = [(a, _box(a.lane, a.y_at(t))) for a in here if f not in hidden.get(id(a), ())]
            if st.full_body_miss_rate:
                occ = sum(_in_roi(b) for _, b in bodies)
                if occ > crowd_threshold:
                    bodies = [
                        (a, b)
                        for a, b in bodies
                        if not (_in_roi(b) and a.crossing is not None and rng_drop.random() < st.full_body_miss_rate)
                    ]
            records = []
            for a, b in bodies:
                records.append(("full_body", a, b))
            if st.head_stream:
                for a in here:
                    if f not in hidden.get(id(a), ()):
                        records.append(("head_only", a, _box(a.lane, a.y_at(t), head=True)))
            records.sort(key=lambda r: (r[0], r[2][0], r[2][1], r[1].person))
            if not records:
                lines.append(json.dumps({"cam": cam, "frame": f, "ts": ts}, sort_keys=True))
                continue
            for kind, a, b in records:
                v = latents[a.person]
                if sigma:
                    v = v + rng_noise.normal(0.0, sigma, size=v.shape)
                    v = v / np.linalg.norm(v)
                if rotated:
                    v = rot @ v
                rec = {
                    "box": list(b),
                    "cam": cam,
                    "conf": 0.9,
                    "emb": [round(float(x), 5) for x in v],
                    "frame": f,
                    "kind": kind,
                    "ts": ts,
                }
                lines.append(json.dumps(rec, sort_keys=True))
            fb = [[a.person, *b] for kind, a, b in records if kind == "full_body"]
            if fb:
                idmap[str(f)] = fb
        logs[cam] = "\n".join(lines) + "\n"
        identity[cam] = idmap

    for a in apps:
        if a.crossing is None:
            continue
        cf = a.crossing_frame
        observed = str(cf) in identity[a.camera] and any(
            r[0] == a.person for r in identity[a.camera][str(cf)]
        )
        truth_events.append(
            {
                "cam": a.camera,
                "door": CAMERA_DOORS[a.camera],
                "direction": a.direction,
                "frame": cf,
                "time_ms": frame_ms[cf],
                "person": a.person,
                "stop": a.stop_id,
                "observed": observed,
            }
        )
    truth_events.sort(key=lambda e: (e["time_ms"], e["cam"], e["person"]))

    door_counts = {d: {"entries": 0, "exits": 0} for d in CAMERA_DOORS.values()}
    per_second: dict[str, dict[str, list[int]]] = {d: {} for d in CAMERA_DOORS.values()}
    for e in truth_events:
        door_counts[e["door"]]["entries" if e["direction"] == "in" else "exits"] += 1
        sec = str(e["time_ms"] // 1000)
        cell = per_second[e["door"]].setdefault(sec, [0, 0])
        cell[0 if e["direction"] == "in" else 1] += 1

    # stops, telematics and doors
    registry = StopRegistry(
        tuple(
            Stop(h.stop_id, next((r.name for r in cfg.route if r.stop_id == h.stop_id), "") or h.stop_id,
                 *_latlon(h.position))
            for h in official
        )
    )
    stops_csv = _csv([(s.stop_id, s.name, s.lat, s.lon) for s in registry.stops], ["stop_id", "name", "lat", "lon"])
    tel_rows = []
    for sec in range(int(math.floor(cfg.duration_s))):
        speed = float(np.interp(sec, kt, kv)) * 3.6
        lat, lon = _latlon(_distance_at(kt, kv, float(sec)))
        odo = _distance_at(kt, kv, float(sec)) / 1000.0
        tel_rows.append((start_ms + 1000 * sec, round(speed, 2), lat, lon, round(odo, 4)))
    telematics_csv = _csv(tel_rows, ["time_ms", "speed_kmh", "lat", "lon", "odometer_km"])

    door_rows = [(start_ms, door, 0) for door in sorted(CAMERA_DOORS.values())]
    for h in halts:
        for door in sorted(CAMERA_DOORS.values()):
            door_rows.append((start_ms + round(h.door_open * 1000), door, 1))
            door_rows.append((start_ms + round(h.door_close * 1000), door, 0))
    door_rows.sort()
    door_csv = _csv(door_rows, ["time_ms", "door_id", "open"])

    journeys = []
    for pid, p in zip(pids, cfg.passengers):
        tb, ta = journey_times[pid]["in"], journey_times[pid]["out"]
        journeys.append(
            {
                "person": pid,
                "board_stop": p.board_stop,
                "alight_stop": p.alight_stop,
                "door_usage": p.door_usage,
                "board_time": start_ms + round(tb * 1000),
                "alight_time": start_ms + round(ta * 1000),
            }
        )
    illegal_events = [
        StopEvent(StopKind.ILLEGAL, h.stop_id, start_ms + round(h.start * 1000),
                  start_ms + round(h.end * 1000), *_latlon(h.position))
        for h in halts if not h.official
    ]
    od = build_matrix(
        [Journey(k, j["board_stop"], j["alight_stop"], j["board_time"], j["alight_time"])
         for k, j in enumerate(journeys)],
        registry,
        illegal_events,
    )
    truth = GroundTruth(
        journeys=journeys,
        events=truth_events,
        door_counts=door_counts,
        per_second=per_second,
        identity_map=identity,
        od=od.to_json(),
        stops=[
            {"stop_id": h.stop_id, "kind": "official" if h.official else "illegal", "mode": h.mode,
             "t_start": start_ms + round(h.start * 1000), "t_end": start_ms + round(h.end * 1000),
             "lat": _latlon(h.position)[0], "lon": _latlon(h.position)[1]}
            for h in halts
        ],
        roles=roles,
        cameras={cam: {"door_id": door, "roi": roi_to_dict(ROI)} for cam, door in CAMERA_DOORS.items()},
        fps=fps,
        start_ms=start_ms,
    )
    return Scenario(cfg, logs, door_csv, telematics_csv, stops_csv, truth)


def _in_roi(box: Sequence[float]) -> bool:
    cx, cy = box[0] + box[2] / 2.0, box[1] + box[3] / 2.0
    return 140.0 <= cx <= 500.0 and 180.0 <= cy <= 300.0


def _parse_log(log: str | Sequence[Mapping]) -> list[dict]:
    if isinstance(log, str):
        return [json.loads(line) for line in log.splitlines() if line.strip()]
    return [dict(r) for r in log]


def replay_check(logs: Mapping[str, str | Sequence[Mapping]], truth: GroundTruth) -> bool:
    """Check that logs and ground truth describe the same geometry.

    Frames must appear in order, the full-body boxes of every frame must equal
    the identity map's boxes, and every true crossing must be visible as the
    person's boxes switching sides at the recorded frame.
    """
    for cam in ("A", "B"):
        if cam not in logs:
            return False
        records = _parse_log(logs[cam])
        frames = [r.get("frame") for r in records]
        if any(b < a for a, b in zip(frames, frames[1:])):
            return False
        observed: dict[str, list] = defaultdict(list)
        for r in records:
            if r.get("kind") == "full_body":
                observed[str(r["frame"])].append(tuple(float(x) for x in r["box"]))
        expected = {
            f: sorted(tuple(float(x) for x in row[1:5]) for row in rows)
            for f, rows in truth.identity_map.get(cam, {}).items()
        }
        if set(observed) != set(expected):
            return False
        if any(sorted(observed[f]) != expected[f] for f in expected):
            return False

    tracks: dict[tuple[str, str], list[tuple[int, tuple]]] = defaultdict(list)
    for cam, frames in truth.identity_map.items():
        for f, rows in frames.items():
            for row in rows:
                tracks[(cam, row[0])].append((int(f), tuple(row[1:5])))
    for e in truth.events:
        seq = sorted(tracks.get((e["cam"], e["person"]), []))
        before = [b for f, b in seq if f < e["frame"]]
        after = [b for f, b in seq if f >= e["frame"]]
        if not before or not after:
            return False
        new_side = 1 if e["direction"] == "in" else -1
        if _side(before[-1]) != -new_side or _side(after[0]) != new_side:
            return False
        if e["observed"] and e["frame"] not in {f for f, _ in seq}:
            return False
    return True
