"""Pipeline configuration: one YAML file, nested dataclasses, strict keys.

Relative paths are resolved against the directory holding the config file.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from busod.counting import CountingConfig, CountingPolicy
from busod.errors import ConfigError
from busod.geometry import DoorLine, Point2, Roi, Side
from busod.reid import ReidConfig
from busod.telematics import StopConfig
from busod.timeline import DEFAULT_FORMAT
from busod.tracking import RepairPolicy, TrackerConfig


@dataclass(frozen=True)
class CameraConfig:
    camera_id: str
    fps: float
    roi: Roi
    segment_id: str = "segment"
    policy: CountingPolicy | None = None
    repair: RepairPolicy | None = None
    # shift taking a head-box centre to the body-centre reference point
    head_offset: tuple[float, float] = (0.0, 0.0)

    @property
    def door_id(self) -> str:
        return self.roi.door_id


@dataclass(frozen=True)
class InputPaths:
    cam_a_log: Path
    cam_b_log: Path
    door_csv: Path
    telematics_csv: Path
    stop_registry: Path


@dataclass(frozen=True)
class PipelineConfig:
    inputs: InputPaths
    cameras: dict[str, CameraConfig]
    tracker: TrackerConfig = TrackerConfig()
    reid: ReidConfig = ReidConfig()
    counting: CountingConfig = CountingConfig()
    stops: StopConfig = StopConfig()
    attach_slack: float = 10.0
    overlay_format: str = DEFAULT_FORMAT
    timezone: str = "UTC"
    output_dir: Path = Path("out")
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def camera_policy(self, cam: str) -> CountingPolicy:
        return self.cameras[cam].policy or self.counting.policy

    def camera_repair(self, cam: str) -> RepairPolicy:
        return self.cameras[cam].repair or self.tracker.repair_policy

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _build(cls, data: Mapping[str, Any] | None, section: str):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {', '.join(unknown)}")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section}: {exc}") from exc


def _points(raw, what: str) -> tuple[Point2, ...]:
    try:
        return tuple(Point2(float(x), float(y)) for x, y in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a list of [x, y] pairs") from exc


def roi_from_dict(d: Mapping[str, Any], door_id: str) -> Roi:
    try:
        line = d["door_line"]
        a, b = line["a"], line["b"]
        side = Side(line.get("interior_side", "positive"))
        door_line = DoorLine(Point2(*map(float, a)), Point2(*map(float, b)), side)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"door {door_id}: door_line needs a, b and interior_side") from exc
    queue = d.get("queue_region")
    return Roi(
        polygon=_points(d.get("polygon", []), "roi.polygon"),
        door_line=door_line,
        queue_region=_points(queue, "roi.queue_region") if queue else None,
        door_id=door_id,
    )


def roi_to_dict(roi: Roi) -> dict:
    out = {
        "polygon": [[p.x, p.y] for p in roi.polygon],
        "door_line": {
            "a": [roi.door_line.a.x, roi.door_line.a.y],
            "b": [roi.door_line.b.x, roi.door_line.b.y],
            "interior_side": roi.door_line.interior_side.value,
        },
    }
    if roi.queue_region is not None:
        out["queue_region"] = [[p.x, p.y] for p in roi.queue_region]
    return out


_TOP_KEYS = {
    "inputs", "cameras", "tracker", "reid", "counting", "stops", "od", "timeline", "output_dir",
}


def config_from_dict(raw: Mapping[str, Any], base_dir: Path | None = None) -> PipelineConfig:
    base = Path(base_dir) if base_dir is not None else Path(".")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    inputs_raw = dict(raw.get("inputs") or {})
    missing = [f.name for f in dataclasses.fields(InputPaths) if f.name not in inputs_raw]
    if missing:
        raise ConfigError(f"inputs missing: {', '.join(missing)}")
    inputs = _build(
        InputPaths, {k: base / str(v) for k, v in inputs_raw.items()}, "inputs"
    )

    cams_raw = raw.get("cameras") or {}
    if set(cams_raw) != {"A", "B"}:
        raise ConfigError("cameras must define exactly A and B")
    cameras = {}
    for cam_id, c in sorted(cams_raw.items()):
        c = dict(c)
        allowed = {"fps", "door_id", "roi", "segment_id", "policy", "repair", "head_offset"}
        extra = sorted(set(c) - allowed)
        if extra:
            raise ConfigError(f"unknown keys in cameras.{cam_id}: {', '.join(extra)}")
        if "fps" not in c or "roi" not in c:
            raise ConfigError(f"cameras.{cam_id} needs fps and roi")
        try:
            cameras[cam_id] = CameraConfig(
                camera_id=cam_id,
                fps=float(c["fps"]),
                roi=roi_from_dict(c["roi"], str(c.get("door_id", cam_id))),
                segment_id=str(c.get("segment_id", "segment")),
                policy=CountingPolicy(c["policy"]) if c.get("policy") else None,
                repair=RepairPolicy(c["repair"]) if c.get("repair") else None,
                head_offset=tuple(float(v) for v in c.get("head_offset", (0.0, 0.0))),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cameras.{cam_id}: {exc}") from exc
        if len(cameras[cam_id].head_offset) != 2:
            raise ConfigError(f"cameras.{cam_id}.head_offset must be [dx, dy]")
        if cameras[cam_id].fps <= 0:
            raise ConfigError(f"cameras.{cam_id}.fps must be positive")

    tracker_raw = dict(raw.get("tracker") or {})
    if "repair_policy" in tracker_raw:
        try:
            tracker_raw["repair_policy"] = RepairPolicy(tracker_raw["repair_policy"])
        except ValueError as exc:
            raise ConfigError(f"tracker.repair_policy: {exc}") from exc
    counting_raw = dict(raw.get("counting") or {})
    if "policy" in counting_raw:
        try:
            counting_raw["policy"] = CountingPolicy(counting_raw["policy"])
        except ValueError as exc:
            raise ConfigError(f"counting.policy: {exc}") from exc

    od_raw = dict(raw.get("od") or {})
    if set(od_raw) - {"attach_slack"}:
        raise ConfigError("od accepts only attach_slack")
    tl_raw = dict(raw.get("timeline") or {})
    if set(tl_raw) - {"format", "timezone"}:
        raise ConfigError("timeline accepts only format and timezone")

    out_dir = Path(str(raw.get("output_dir", "out")))
    return PipelineConfig(
        inputs=inputs,
        cameras=cameras,
        tracker=_build(TrackerConfig, tracker_raw, "tracker"),
        reid=_build(ReidConfig, raw.get("reid"), "reid"),
        counting=_build(CountingConfig, counting_raw, "counting"),
        stops=_build(StopConfig, raw.get("stops"), "stops"),
        attach_slack=float(od_raw.get("attach_slack", 10.0)),
        overlay_format=str(tl_raw.get("format", DEFAULT_FORMAT)),
        timezone=str(tl_raw.get("timezone", "UTC")),
        output_dir=out_dir if out_dir.is_absolute() else base / out_dir,
        raw=json.loads(json.dumps(dict(raw), default=str)),
    )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return config_from_dict(raw, path.parent)


def _plain(value):
    if isinstance(value, enum.Enum):
        return value.value
    return value


def section_dict(obj) -> dict:
    return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}


def default_sections() -> dict:
    """Every tunable threshold with its default, as written to config files."""
    return {
        "tracker": section_dict(TrackerConfig()),
        "reid": section_dict(ReidConfig()),
        "counting": section_dict(CountingConfig()),
        "stops": section_dict(StopConfig()),
        "od": {"attach_slack": 10.0},
        "timeline": {"format": DEFAULT_FORMAT, "timezone": "UTC"},
    }


def dump_yaml(data: Mapping, path: Path) -> None:
    path.write_text(yaml.safe_dump(dict(data), sort_keys=True, default_flow_style=None))
