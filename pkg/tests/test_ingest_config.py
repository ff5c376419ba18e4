import json
import shutil

import pytest
import yaml

from busod.config import config_from_dict, default_sections, load_config
from busod.counting import CountingPolicy
from busod.errors import ConfigError, InputSchemaError
from busod.ingest import ingest_detections, read_door_csv, read_stop_registry, read_telematics_csv
from busod.simulator import ROI
from busod.tracking import RepairPolicy


def _line(frame, emb=(1.0, 0.0), **extra):
    rec = {"frame": frame, "ts": "2025-03-26 07:00:00", "cam": "A", "kind": "full_body",
           "box": [0, 0, 10, 20], "conf": 0.9, "emb": list(emb)}
    rec.update(extra)
    return json.dumps(rec)


def test_empty_log(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text("")
    assert ingest_detections(p) == ([], [])


def test_three_lines_in_frame_order(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text("\n".join([_line(2), _line(0), _line(1)]) + "\n")
    dets, stamps = ingest_detections(p)
    assert [d.frame_index for d in dets] == [0, 1, 2]
    assert [s.frame_index for s in stamps] == [0, 1, 2]


def test_frame_marker_lines(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text(json.dumps({"frame": 0, "ts": "x", "cam": "A"}) + "\n" + _line(1) + "\n")
    dets, stamps = ingest_detections(p)
    assert len(dets) == 1 and len(stamps) == 2


def test_dimension_drift_names_line(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text("\n".join([_line(0), _line(1), _line(2, emb=(1.0, 0.0, 0.0))]))
    with pytest.raises(InputSchemaError, match=":3:"):
        ingest_detections(p)


@pytest.mark.parametrize("bad", ["{not json", json.dumps({"ts": "x"}), _line(0, conf=1.5), _line(0, emb=[])])
def test_malformed_lines(tmp_path, bad):
    p = tmp_path / "a.jsonl"
    p.write_text(_line(0) + "\n" + bad + "\n")
    with pytest.raises(InputSchemaError, match=":2:"):
        ingest_detections(p)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        ingest_detections(tmp_path / "nope.jsonl")


def test_csv_readers(tmp_path):
    (tmp_path / "d.csv").write_text("time_ms,door_id,open\n0,front,1\n5,front,0\n")
    assert [s.open for s in read_door_csv(tmp_path / "d.csv")] == [True, False]
    (tmp_path / "t.csv").write_text("time_ms,speed_kmh,lat,lon,odometer_km,door_open\n0,0,0,0,0,1\n1000,3,0,0,0,\n")
    tel = read_telematics_csv(tmp_path / "t.csv")
    assert tel[0].door_open is True and tel[1].door_open is None
    (tmp_path / "t2.csv").write_text("time_ms,speed_kmh,lat,lon,odometer_km\n1000,0,0,0,0\n1000,0,0,0,0\n")
    with pytest.raises(InputSchemaError):
        read_telematics_csv(tmp_path / "t2.csv")
    (tmp_path / "s.csv").write_text("stop_id,name,lat,lon\n")
    with pytest.raises(ConfigError):
        read_stop_registry(tmp_path / "s.csv")


def test_door_csv_bad_flag(tmp_path):
    (tmp_path / "d.csv").write_text("time_ms,door_id,open\n0,front,maybe\n")
    with pytest.raises(InputSchemaError):
        read_door_csv(tmp_path / "d.csv")


def _raw(clean_dir):
    return yaml.safe_load((clean_dir / "pipeline.yaml").read_text())


def test_load_generated_config(clean_dir):
    cfg = load_config(clean_dir / "pipeline.yaml")
    assert set(cfg.cameras) == {"A", "B"}
    assert cfg.cameras["A"].door_id == "front"
    assert cfg.inputs.cam_a_log == clean_dir / "cam_A.jsonl"
    assert cfg.camera_policy("A") is CountingPolicy.BASELINE
    assert cfg.camera_repair("B") is RepairPolicy.NONE
    assert len(cfg.digest()) == 64


def test_per_camera_overrides(clean_dir):
    raw = _raw(clean_dir)
    raw["cameras"]["B"]["policy"] = "door_state"
    raw["cameras"]["B"]["repair"] = "door_traj"
    cfg = config_from_dict(raw, clean_dir)
    assert cfg.camera_policy("B") is CountingPolicy.DOOR_STATE
    assert cfg.camera_policy("A") is CountingPolicy.BASELINE
    assert cfg.camera_repair("B") is RepairPolicy.DOOR_AWARE_TRAJECTORY


@pytest.mark.parametrize(
    "mutate",
    [
        lambda r: r.update(bogus=1),
        lambda r: r["tracker"].update(iou_gate=3.0),
        lambda r: r["tracker"].update(unknown=1),
        lambda r: r["counting"].update(policy="sometimes"),
        lambda r: r["cameras"].pop("B"),
        lambda r: r["inputs"].pop("stop_registry"),
        lambda r: r["cameras"]["A"].update(fps=0),
        lambda r: r["cameras"]["A"]["roi"].update(polygon=[[0, 0], [10, 10], [10, 0], [0, 10]]),
        lambda r: r["reid"].update(tau_reid=-1),
    ],
)
def test_invalid_configs(clean_dir, mutate):
    raw = _raw(clean_dir)
    mutate(raw)
    with pytest.raises(ConfigError):
        config_from_dict(raw, clean_dir)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.yaml")


def test_default_config_file_matches_code():
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"
    raw = yaml.safe_load(path.read_text())
    raw["reid"]["time_overlap_slack"] = default_sections()["reid"]["time_overlap_slack"]
    for section, values in default_sections().items():
        assert raw[section] == values, section
    cfg = load_config(path)
    for cam in cfg.cameras.values():
        assert (cam.roi.polygon, cam.roi.door_line, cam.roi.queue_region) == (ROI.polygon, ROI.door_line, ROI.queue_region)


def test_relative_paths_follow_config(tmp_path, clean_dir):
    shutil.copytree(clean_dir, tmp_path / "moved")
    cfg = load_config(tmp_path / "moved" / "pipeline.yaml")
    assert cfg.inputs.door_csv == tmp_path / "moved" / "doors.csv"
