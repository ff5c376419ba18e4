"""End-to-end orchestration: logs and side streams in, OD matrix and reports out.

Stages run in a fixed order and every error leaving a stage carries its
name. All outputs are written with sorted keys so that identical inputs give
identical bytes.
"""

from __future__ import annotations

import contextlib
import csv
import dataclasses
import hashlib
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from busod import __version__
from busod.config import PipelineConfig
from busod.counting import CountingPolicy, DoorTimeline, RoiEvent, count_tracklets, per_second_counts
from busod.errors import ConfigError, HybridStreamMissing, InputSchemaError, PipelineError
from busod.evaluation import (
    DoorCounts,
    EventRecord,
    MotReport,
    count_metrics,
    cross_camera_match_rate,
    event_metrics,
    format_report,
    mot_metrics,
    od_compare,
    tracklet_truth_labels,
)
from busod.geometry import contains
from busod.ingest import ingest_detections, read_door_csv, read_stop_registry, read_telematics_csv
from busod.odmatrix import Journey, OdMatrix, build_journeys, build_matrix
from busod.reid import GlobalIdentity, associate_cameras, dedupe_events
from busod.telematics import StopEvent, classify_stream, segment_stops
from busod.timeline import VideoMeta, resolve_timeline
from busod.tracking import Detection, DetectorKind, Tracklet, run_tracker


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except PipelineError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


@dataclass
class CameraResult:
    camera_id: str
    tracklets: list[Tracklet]
    events: list[RoiEvent]
    occupancy: dict[int, int]
    stitches: list[dict]


@dataclass
class PipelineResult:
    cameras: dict[str, CameraResult]
    identities: list[GlobalIdentity]
    identity_events: dict[int, list[RoiEvent]]
    stop_events: list[StopEvent]
    journeys: list[Journey]
    od: OdMatrix
    door_counts: dict[str, DoorCounts]
    files: dict[str, str] = field(default_factory=dict)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def _csv_text(header: list[str], rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _frames_for_tracker(
    cam: str,
    dets: list[Detection],
    frames: list[int],
    cfg: PipelineConfig,
    doors: DoorTimeline,
    times: dict[int, int],
):
    policy = cfg.camera_policy(cam)
    roi = cfg.cameras[cam].roi
    by_frame: dict[int, list[Detection]] = defaultdict(list)
    for d in dets:
        by_frame[d.frame_index].append(d)
    for f in frames:
        here = by_frame.get(f, [])
        body = [d for d in here if d.detector_kind is DetectorKind.FULL_BODY]
        chosen = body
        if policy is CountingPolicy.HYBRID:
            occ = sum(contains(roi.polygon, d.center) for d in body)
            if occ > cfg.counting.density_threshold:
                dx, dy = cfg.cameras[cam].head_offset
                heads = [
                    dataclasses.replace(d, box=d.box.translated(dx, dy))
                    for d in here
                    if d.detector_kind is DetectorKind.HEAD_ONLY
                ]
                chosen = heads or body
        yield f, chosen, doors.is_open(roi.door_id, times[f])


def _track_and_count(
    cam: str, log: Path, cfg: PipelineConfig, doors: DoorTimeline
) -> tuple[CameraResult, int | None]:
    cam_cfg = cfg.cameras[cam]
    with stage(f"ingest:{cam}"):
        dets, stamps = ingest_detections(log)
        foreign = {d.camera_id for d in dets} - {cam}
        if foreign:
            raise InputSchemaError(f"log for camera {cam} contains records of {sorted(foreign)}")
    dim = dets[0].embedding.size if dets else None
    with stage(f"timeline:{cam}"):
        resolved = resolve_timeline(
            stamps, VideoMeta(cam_cfg.fps, cam, cam_cfg.segment_id), cfg.overlay_format, cfg.timezone
        )
        times = {s.frame_index: s.resolved_time for s in resolved}
        for d in dets:
            d.time_ms = times[d.frame_index]
    policy = cfg.camera_policy(cam)
    with stage(f"tracking:{cam}"):
        if policy is CountingPolicy.HYBRID and not any(
            d.detector_kind is DetectorKind.HEAD_ONLY for d in dets
        ):
            raise HybridStreamMissing(f"camera {cam}: hybrid policy needs head_only detections")
        tcfg = dataclasses.replace(cfg.tracker, repair_policy=cfg.camera_repair(cam))
        tracklets, occupancy, stitches = run_tracker(
            _frames_for_tracker(cam, dets, sorted(times), cfg, doors, times),
            cam,
            tcfg,
            cam_cfg.roi,
            cfg.counting.density_threshold,
        )
    with stage(f"counting:{cam}"):
        events = count_tracklets(tracklets, cam_cfg.roi, cfg.counting, policy, doors)
    return CameraResult(cam, tracklets, events, occupancy, stitches), dim


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path | None = None) -> PipelineResult:
    with stage("ingest"):
        doors = DoorTimeline(read_door_csv(cfg.inputs.door_csv))
        samples = read_telematics_csv(cfg.inputs.telematics_csv)
        registry = read_stop_registry(cfg.inputs.stop_registry)
        for p in (cfg.inputs.cam_a_log, cfg.inputs.cam_b_log):
            if not Path(p).is_file():
                raise ConfigError(f"input file not found: {p}")

    cams: dict[str, CameraResult] = {}
    dims = {}
    for cam, log in (("A", cfg.inputs.cam_a_log), ("B", cfg.inputs.cam_b_log)):
        cams[cam], dims[cam] = _track_and_count(cam, log, cfg, doors)
    with stage("ingest"):
        known = {d for d in dims.values() if d is not None}
        if len(known) > 1:
            raise InputSchemaError(f"embedding dimension differs between cameras: {dims}")

    with stage("reid"):
        identities = associate_cameras(cams["A"].tracklets, cams["B"].tracklets, cfg.reid)
        events_by_track = defaultdict(list)
        for cam, res in cams.items():
            for e in res.events:
                events_by_track[(cam, e.local_id)].append(e)
        identity_events = {}
        for ident in identities:
            evs = [e for cam, lid in ident.members.items() for e in events_by_track[(cam, lid)]]
            identity_events[ident.global_id] = dedupe_events(
                ident, evs, cfg.counting.dedup_window, cfg.reid.in_camera, cfg.reid.out_camera
            )

    with stage("telematics"):
        kept = [e for evs in identity_events.values() for e in evs]
        seconds = {e.resolved_time // 1000 for e in kept}
        door_ids = sorted({c.door_id for c in cfg.cameras.values()})
        classes = classify_stream(
            samples,
            registry,
            cfg.stops,
            seconds,
            door_open_at=lambda t: any(doors.is_open(d, t) for d in door_ids),
        )
        stop_events = segment_stops(samples, classes, cfg.stops, registry)

    with stage("od"):
        journeys = build_journeys(identity_events, stop_events, cfg.attach_slack)
        od = build_matrix(journeys, registry, stop_events)

    door_counts = {}
    for cam, res in cams.items():
        n_in = sum(e.direction.value == "in" for e in res.events)
        door_counts[cfg.cameras[cam].door_id] = DoorCounts(n_in, len(res.events) - n_in)

    result = PipelineResult(cams, identities, identity_events, stop_events, journeys, od, door_counts)
    with stage("output"):
        result.files = _write_outputs(result, cfg, Path(out_dir) if out_dir else cfg.output_dir)
    return result


def _write_outputs(res: PipelineResult, cfg: PipelineConfig, out: Path) -> dict[str, str]:
    out.mkdir(parents=True, exist_ok=True)
    gid_of = {(cam, lid): ident.global_id for ident in res.identities for cam, lid in ident.members.items()}
    files: dict[str, str] = {}

    for cam, r in res.cameras.items():
        rows = []
        for t in r.tracklets:
            for d in t.detections:
                b = d.box
                rows.append((d.frame_index, t.local_id, d.detector_kind.value, b.left, b.top, b.width, b.height))
        rows.sort()
        files[f"tracks_{cam}.csv"] = _csv_text(["frame", "local_id", "kind", "left", "top", "width", "height"], rows)
        files[f"stitches_{cam}.jsonl"] = _jsonl(r.stitches)
        files[f"tracklets_{cam}.jsonl"] = _jsonl(
            [
                {
                    "local_id": t.local_id,
                    "global_id": gid_of.get((cam, t.local_id)),
                    "first_frame": t.first_frame,
                    "last_frame": t.last_frame,
                    "t_start": t.t_start,
                    "t_end": t.t_end,
                    "detections": len(t.detections),
                    "stitched_from": t.stitched_from,
                }
                for t in r.tracklets
            ]
        )

    kept = {id(e) for evs in res.identity_events.values() for e in evs}
    ev_rows = []
    for cam, r in res.cameras.items():
        for e in r.events:
            ev_rows.append(
                {
                    "time_ms": e.resolved_time,
                    "cam": cam,
                    "local_id": e.local_id,
                    "global_id": gid_of.get((cam, e.local_id)),
                    "direction": e.direction.value,
                    "frame": e.frame_index,
                    "door_id": e.door_id,
                    "policy": e.policy.value,
                    "used_for_od": id(e) in kept,
                }
            )
    ev_rows.sort(key=lambda r: (r["time_ms"], r["cam"], r["local_id"], r["frame"]))
    files["events.jsonl"] = _jsonl(ev_rows)

    counts = {}
    for cam, r in res.cameras.items():
        door = cfg.cameras[cam].door_id
        dc = res.door_counts[door]
        counts[door] = {
            "camera": cam,
            "segment": cfg.cameras[cam].segment_id,
            "entries": dc.entries,
            "exits": dc.exits,
            "policy": cfg.camera_policy(cam).value,
            "repair": cfg.camera_repair(cam).value,
            "per_second": {str(k): list(v) for k, v in sorted(per_second_counts(r.events).items())},
        }
    files["counts.json"] = _dumps(counts)
    files["identities.jsonl"] = _jsonl(
        [
            {"global_id": i.global_id, "members": i.members, "match_cost": i.match_cost, "t_start": i.t_start}
            for i in res.identities
        ]
    )
    files["stop_events.jsonl"] = _jsonl(
        [
            {"stop_id": s.stop_id, "kind": s.kind.value, "t_start": s.t_start, "t_end": s.t_end,
             "lat": s.lat, "lon": s.lon}
            for s in res.stop_events
        ]
    )
    files["journeys.jsonl"] = _jsonl(
        {"global_id": j.global_id, "board_stop": j.board_stop, "alight_stop": j.alight_stop,
         "board_time": j.board_time, "alight_time": j.alight_time}
        for j in res.journeys
    )
    files["od_matrix.csv"] = res.od.to_csv()
    files["od_matrix.json"] = _dumps(res.od.to_json())

    inputs = {
        name: {"path": Path(p).name, "sha256": sha256_file(Path(p))}
        for name, p in sorted(dataclasses.asdict(cfg.inputs).items())
    }
    files["manifest.json"] = _dumps(
        {
            "version": __version__,
            "config_sha256": cfg.digest(),
            "inputs": inputs,
            "policies": {cam: cfg.camera_policy(cam).value for cam in sorted(cfg.cameras)},
            "repair": {cam: cfg.camera_repair(cam).value for cam in sorted(cfg.cameras)},
            "outputs": {
                name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())
            },
        }
    )
    for name, text in files.items():
        (out / name).write_text(text)
    return files


# ---------------------------------------------------------------------------
# evaluation against simulator truth


def _load_json(path: Path):
    if not path.is_file():
        raise ConfigError(f"missing file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputSchemaError(f"{path.name}: {exc}") from exc


def _load_jsonl(path: Path) -> list:
    if not path.is_file():
        raise ConfigError(f"missing file: {path}")
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if line.strip():
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputSchemaError(f"{path.name}:{lineno}: {exc}") from exc
    return out


def read_tracks(path: Path) -> dict[int, list[tuple[int, tuple]]]:
    out: dict[int, list[tuple[int, tuple]]] = defaultdict(list)
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            if row["kind"] != DetectorKind.FULL_BODY.value:
                continue
            box = tuple(float(row[k]) for k in ("left", "top", "width", "height"))
            out[int(row["frame"])].append((int(row["local_id"]), box))
    return dict(out)


def run_eval(pred_dir: str | Path, truth_path: str | Path, out_dir: str | Path | None = None) -> dict:
    pred_dir = Path(pred_dir)
    with stage("eval"):
        truth = _load_json(Path(truth_path))
        counts = _load_json(pred_dir / "counts.json")
        od_pred = OdMatrix.from_json(_load_json(pred_dir / "od_matrix.json"))
        identities = _load_jsonl(pred_dir / "identities.jsonl")
        events = _load_jsonl(pred_dir / "events.jsonl")

        truth_counts = truth.get("door_counts") or {}
        pred_c, truth_c = {}, {}
        for door, c in counts.items():
            key = f"{c.get('segment', 'segment')}/{door}"
            pred_c[key] = DoorCounts(int(c["entries"]), int(c["exits"]))
            t = truth_counts.get(door, {"entries": 0, "exits": 0})
            truth_c[key] = DoorCounts(int(t["entries"]), int(t["exits"]))
        report = count_metrics(pred_c, truth_c)
        od = od_compare(od_pred, OdMatrix.from_json(truth["od"])) if truth.get("od") else None

        pred_events = [EventRecord(r["cam"], r["direction"], int(r["time_ms"])) for r in events]
        truth_events = [EventRecord(e["cam"], e["direction"], int(e["time_ms"])) for e in truth.get("events", [])]
        ev = event_metrics(pred_events, truth_events)

        idmap = truth.get("identity_map") or {}
        mot: MotReport
        xcam = None
        if any(idmap.values()):
            truth_map = {
                cam: {int(f): [(row[0], tuple(row[1:5])) for row in rows] for f, rows in frames.items()}
                for cam, frames in idmap.items()
            }
            pred_map = {}
            for cam in truth_map:
                p = pred_dir / f"tracks_{cam}.csv"
                if not p.is_file():
                    raise ConfigError(f"missing file: {p}")
                pred_map[cam] = read_tracks(p)
            mot = mot_metrics(pred_map, truth_map)
            labels = tracklet_truth_labels(pred_map, truth_map)
            xcam = cross_camera_match_rate([i["members"] for i in identities], labels)
        else:
            mot = MotReport(0, 0, 0.0, 0.0, available=False)

    result = {
        "counts": report.to_json(),
        "od": od,
        "events": ev,
        "mot": mot.to_json(),
        "cross_camera": xcam,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(_dumps(result))
        (out / "report.txt").write_text(format_report(report, od, mot, ev, xcam))
        rows = [
            (k, s.pred_entries, s.truth_entries, s.pred_exits, s.truth_exits,
             round(s.entry_accuracy, 6), round(s.exit_accuracy, 6), round(s.total_accuracy, 6), int(s.complete_miss))
            for k, s in sorted(report.segments.items())
        ]
        (out / "per_clip.csv").write_text(
            _csv_text(["segment", "pred_in", "true_in", "pred_out", "true_out", "entry_acc", "exit_acc",
                       "total_acc", "complete_miss"], rows)
        )
    return result
