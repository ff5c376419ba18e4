"""Readers for detection logs and the CSV side streams."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from busod.counting import DoorStateSample
from busod.errors import ConfigError, InputSchemaError
from busod.geometry import BoundingBox
from busod.telematics import Stop, StopRegistry, TelematicsSample
from busod.timeline import FrameStamp
from busod.tracking import Detection, DetectorKind


def _require(path: Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    return path


def ingest_detections(path: str | Path) -> tuple[list[Detection], list[FrameStamp]]:
    """Parse a JSON-lines detection log.

    A line without ``box`` only marks a frame and its overlay string. Returns
    detections sorted by frame (stable) and one stamp per frame.
    """
    path = _require(Path(path))
    dets: list[Detection] = []
    stamps: dict[int, str] = {}
    dim: int | None = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                frame = int(rec["frame"])
                ts = str(rec.get("ts", ""))
                cam = str(rec["cam"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputSchemaError(f"{path.name}:{lineno}: malformed record ({exc})") from exc
            if frame < 0:
                raise InputSchemaError(f"{path.name}:{lineno}: negative frame index")
            stamps.setdefault(frame, ts)
            if "box" not in rec:
                continue
            try:
                l, t, w, h = (float(v) for v in rec["box"])
                box = BoundingBox(l, t, w, h)
                emb = np.asarray(rec["emb"], dtype=float)
                kind = DetectorKind(rec.get("kind", "full_body"))
                conf = float(rec.get("conf", 1.0))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputSchemaError(f"{path.name}:{lineno}: bad detection ({exc})") from exc
            if not 0.0 <= conf <= 1.0:
                raise InputSchemaError(f"{path.name}:{lineno}: confidence {conf} outside [0, 1]")
            if emb.ndim != 1 or emb.size == 0 or not np.all(np.isfinite(emb)):
                raise InputSchemaError(f"{path.name}:{lineno}: embedding must be a finite vector")
            if dim is None:
                dim = emb.size
            elif emb.size != dim:
                raise InputSchemaError(
                    f"{path.name}:{lineno}: embedding length {emb.size} differs from {dim}"
                )
            dets.append(Detection(cam, frame, box, conf, emb, kind))
    dets.sort(key=lambda d: d.frame_index)
    return dets, [FrameStamp(f, stamps[f]) for f in sorted(stamps)]


def _rows(path: Path, required: list[str]) -> list[tuple[int, dict]]:
    path = _require(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise InputSchemaError(f"{path.name}: missing columns {', '.join(missing)}")
        return [(i, row) for i, row in enumerate(reader, start=2)]


def read_door_csv(path: str | Path) -> list[DoorStateSample]:
    out = []
    for lineno, row in _rows(Path(path), ["time_ms", "door_id", "open"]):
        try:
            state = row["open"].strip().lower()
            if state not in ("0", "1", "true", "false"):
                raise ValueError(f"open must be 0/1, got {row['open']!r}")
            out.append(DoorStateSample(int(row["time_ms"]), row["door_id"], state in ("1", "true")))
        except (TypeError, ValueError) as exc:
            raise InputSchemaError(f"{Path(path).name}:{lineno}: {exc}") from exc
    return out


def read_telematics_csv(path: str | Path) -> list[TelematicsSample]:
    out = []
    for lineno, row in _rows(Path(path), ["time_ms", "speed_kmh", "lat", "lon"]):
        try:
            door = row.get("door_open")
            out.append(
                TelematicsSample(
                    time=int(row["time_ms"]),
                    speed=float(row["speed_kmh"]),
                    lat=float(row["lat"]),
                    lon=float(row["lon"]),
                    odometer=float(row.get("odometer_km") or 0.0),
                    door_open=None if door in (None, "") else door.strip() in ("1", "true"),
                )
            )
        except (TypeError, ValueError) as exc:
            raise InputSchemaError(f"{Path(path).name}:{lineno}: {exc}") from exc
        if out[-1].speed < 0:
            raise InputSchemaError(f"{Path(path).name}:{lineno}: negative speed")
    times = [s.time for s in out]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise InputSchemaError(f"{Path(path).name}: timestamps must increase")
    return out


def read_stop_registry(path: str | Path) -> StopRegistry:
    stops = []
    for lineno, row in _rows(Path(path), ["stop_id", "lat", "lon"]):
        try:
            stops.append(Stop(row["stop_id"], row.get("name") or row["stop_id"], float(row["lat"]), float(row["lon"])))
        except (TypeError, ValueError) as exc:
            raise InputSchemaError(f"{Path(path).name}:{lineno}: {exc}") from exc
    if not stops:
        raise ConfigError(f"{Path(path).name}: stop registry is empty")
    return StopRegistry(tuple(stops))
