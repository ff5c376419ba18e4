"""Counting, OD and identity metrics.

Count accuracy is ``min(pred, truth) / max(pred, truth)`` per door and
``sum(min) / sum(max)`` in aggregate, so over- and under-counting are
penalised alike. Both this and event-level precision/recall are reported;
the two families are not reconciled.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from busod.assignment import solve_masked
from busod.errors import InputSchemaError, MetricUnavailable
from busod.odmatrix import OdMatrix


@dataclass(frozen=True)
class DoorCounts:
    entries: int
    exits: int


def count_accuracy(pred: int, truth: int) -> float:
    if truth == 0:
        return 1.0 if pred == 0 else 0.0
    return min(pred, truth) / max(pred, truth)


def _ratio(mins: int, maxs: int) -> float:
    return 1.0 if maxs == 0 else mins / maxs


@dataclass
class SegmentReport:
    pred_entries: int
    truth_entries: int
    pred_exits: int
    truth_exits: int
    entry_accuracy: float
    exit_accuracy: float
    total_accuracy: float
    complete_miss: bool


@dataclass
class CountReport:
    entry_accuracy: float
    exit_accuracy: float
    total_accuracy: float
    entry_mae: float
    exit_mae: float
    complete_misses: int
    segments: dict[str, SegmentReport] = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["segments"] = {k: asdict(v) for k, v in sorted(self.segments.items())}
        return d


def count_metrics(
    pred: Mapping[str, DoorCounts], truth: Mapping[str, DoorCounts]
) -> CountReport:
    if set(pred) != set(truth):
        raise InputSchemaError(
            f"segment sets differ: {sorted(set(pred) ^ set(truth))}"
        )
    segs: dict[str, SegmentReport] = {}
    min_in = max_in = min_out = max_out = 0
    abs_in: list[int] = []
    abs_out: list[int] = []
    misses = 0
    for key in sorted(pred):
        p, t = pred[key], truth[key]
        miss = (p.entries + p.exits) == 0 and (t.entries + t.exits) > 0
        misses += miss
        segs[key] = SegmentReport(
            pred_entries=p.entries,
            truth_entries=t.entries,
            pred_exits=p.exits,
            truth_exits=t.exits,
            entry_accuracy=count_accuracy(p.entries, t.entries),
            exit_accuracy=count_accuracy(p.exits, t.exits),
            total_accuracy=_ratio(
                min(p.entries, t.entries) + min(p.exits, t.exits),
                max(p.entries, t.entries) + max(p.exits, t.exits),
            ),
            complete_miss=miss,
        )
        min_in += min(p.entries, t.entries)
        max_in += max(p.entries, t.entries)
        min_out += min(p.exits, t.exits)
        max_out += max(p.exits, t.exits)
        abs_in.append(abs(p.entries - t.entries))
        abs_out.append(abs(p.exits - t.exits))
    return CountReport(
        entry_accuracy=_ratio(min_in, max_in),
        exit_accuracy=_ratio(min_out, max_out),
        total_accuracy=_ratio(min_in + min_out, max_in + max_out),
        entry_mae=float(np.mean(abs_in)) if abs_in else 0.0,
        exit_mae=float(np.mean(abs_out)) if abs_out else 0.0,
        complete_misses=misses,
        segments=segs,
    )


def od_compare(pred: OdMatrix, truth: OdMatrix) -> dict:
    stops = list(dict.fromkeys(list(truth.stops) + list(pred.stops)))
    if not stops:
        return {"exact_cell_match": 1.0, "l1_error": 0}
    equal = 0
    l1 = 0
    for o in stops:
        for d in stops:
            diff = abs(pred.get(o, d) - truth.get(o, d))
            equal += diff == 0
            l1 += diff
    return {"exact_cell_match": equal / (len(stops) ** 2), "l1_error": l1}


# ---------------------------------------------------------------------------
# event-level matching


@dataclass(frozen=True)
class EventRecord:
    camera_id: str
    direction: str
    time_ms: int


def event_metrics(
    pred: Sequence[EventRecord], truth: Sequence[EventRecord], tolerance_ms: int = 2000
) -> dict:
    """One-to-one matching per camera and direction within a time tolerance."""
    groups: dict[tuple[str, str], tuple[list[int], list[int]]] = defaultdict(lambda: ([], []))
    for e in pred:
        groups[(e.camera_id, e.direction)][0].append(e.time_ms)
    for e in truth:
        groups[(e.camera_id, e.direction)][1].append(e.time_ms)
    tp = 0
    for p_times, t_times in groups.values():
        if not p_times or not t_times:
            continue
        diff = np.abs(np.subtract.outer(np.array(p_times, float), np.array(t_times, float)))
        tp += len(solve_masked(diff, diff <= tolerance_ms))
    n_pred, n_truth = len(pred), len(truth)
    precision = tp / n_pred if n_pred else 1.0
    recall = tp / n_truth if n_truth else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return {
        "true_positives": tp,
        "predicted": n_pred,
        "truth": n_truth,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


# ---------------------------------------------------------------------------
# MOT-lite identity metrics

Box = tuple[float, float, float, float]  # left, top, width, height


def _center(b: Box) -> tuple[float, float]:
    return b[0] + b[2] / 2.0, b[1] + b[3] / 2.0


def _inside(p: tuple[float, float], b: Box) -> bool:
    return b[0] <= p[0] <= b[0] + b[2] and b[1] <= p[1] <= b[1] + b[3]


def match_frame(pred: Sequence[Box], truth: Sequence[Box]) -> list[tuple[int, int]]:
    """Mutual centre-in-box matching, ties broken by centre distance."""
    if not pred or not truth:
        return []
    cost = np.zeros((len(pred), len(truth)))
    allowed = np.zeros((len(pred), len(truth)), dtype=bool)
    for i, pb in enumerate(pred):
        pc = _center(pb)
        for j, tb in enumerate(truth):
            tc = _center(tb)
            cost[i, j] = float(np.hypot(pc[0] - tc[0], pc[1] - tc[1]))
            allowed[i, j] = _inside(tc, pb) and _inside(pc, tb)
    return solve_masked(cost, allowed)


@dataclass
class MotReport:
    id_switches: int
    fragmentation: int
    idf1: float
    detection_f1: float
    available: bool = True

    def to_json(self) -> dict:
        return asdict(self)


PredTracks = Mapping[str, Mapping[int, Sequence[tuple[int, Box]]]]  # cam -> frame -> [(id, box)]
TruthMap = Mapping[str, Mapping[int, Sequence[tuple[int, Box]]]]  # cam -> frame -> [(person, box)]


def frame_matches(pred: PredTracks, truth: TruthMap) -> dict:
    """Per-camera frame matching shared by the identity metrics."""
    out = {"pairs": [], "tp": 0, "fp": 0, "fn": 0, "truth_obs": defaultdict(list)}
    for cam in sorted(set(pred) | set(truth)):
        p_frames = pred.get(cam, {})
        t_frames = truth.get(cam, {})
        for frame in sorted(set(p_frames) | set(t_frames)):
            p = list(p_frames.get(frame, ()))
            t = list(t_frames.get(frame, ()))
            m = match_frame([b for _, b in p], [b for _, b in t])
            matched_t = {j: i for i, j in m}
            out["tp"] += len(m)
            out["fp"] += len(p) - len(m)
            out["fn"] += len(t) - len(m)
            for j, (pid, _) in enumerate(t):
                pred_id = p[matched_t[j]][0] if j in matched_t else None
                out["truth_obs"][(cam, pid)].append((frame, pred_id))
            for i, j in m:
                out["pairs"].append((cam, frame, t[j][0], p[i][0]))
    return out


def mot_metrics(pred: PredTracks, truth: TruthMap | None) -> MotReport:
    if not truth:
        raise MetricUnavailable("no detection-level ground truth")
    fm = frame_matches(pred, truth)
    switches = 0
    frags = 0
    for obs in fm["truth_obs"].values():
        # a segment is a run of observations matched to one predicted id;
        # unmatched observations end it, frames without the person do not
        last_id = None
        segments = 0
        open_run = False
        for _frame, pid in obs:
            if pid is None:
                open_run = False
                continue
            if last_id is not None and pid != last_id:
                switches += 1
            if not open_run or pid != last_id:
                segments += 1
            last_id = pid
            open_run = True
        frags += max(0, segments - 1)

    overlap: Counter = Counter()
    for cam, _frame, person, track in fm["pairs"]:
        overlap[((cam, person), (cam, track))] += 1
    truth_ids = sorted({k[0] for k in overlap} | set(fm["truth_obs"]))
    pred_ids = sorted({k[1] for k in overlap})
    n_truth = sum(len(v) for v in fm["truth_obs"].values())
    n_pred = fm["tp"] + fm["fp"]
    idtp = 0
    if truth_ids and pred_ids:
        ov = np.array([[overlap.get((t, p), 0) for p in pred_ids] for t in truth_ids], dtype=float)
        # every pair is allowed: zero-overlap pairs add nothing, so a full
        # matching of maximum weight is also a best partial one
        idtp = int(sum(ov[i, j] for i, j in solve_masked(-ov, np.ones(ov.shape, dtype=bool))))
    idf1 = 2 * idtp / (n_truth + n_pred) if (n_truth + n_pred) else 1.0
    tp, fp, fn = fm["tp"], fm["fp"], fm["fn"]
    det_f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 1.0
    return MotReport(switches, frags, idf1, det_f1)


def tracklet_truth_labels(pred: PredTracks, truth: TruthMap) -> dict[tuple[str, int], int]:
    """Majority ground-truth person for every predicted tracklet."""
    votes: dict[tuple[str, int], Counter] = defaultdict(Counter)
    for cam, _frame, person, track in frame_matches(pred, truth)["pairs"]:
        votes[(cam, track)][person] += 1
    return {k: min(c, key=lambda p: (-c[p], p)) for k, c in votes.items()}


def cross_camera_match_rate(
    identities: Iterable[Mapping[str, int]],
    labels: Mapping[tuple[str, int], int],
    cameras: tuple[str, str] = ("A", "B"),
) -> dict:
    """Fraction of people seen by both cameras whose tracklets share one identity."""
    cam_a, cam_b = cameras
    seen: dict[int, set[str]] = defaultdict(set)
    for (cam, _tid), person in labels.items():
        seen[person].add(cam)
    eligible = sorted(p for p, cams in seen.items() if {cam_a, cam_b} <= cams)
    linked = set()
    for members in identities:
        if cam_a in members and cam_b in members:
            pa = labels.get((cam_a, members[cam_a]))
            pb = labels.get((cam_b, members[cam_b]))
            if pa is not None and pa == pb:
                linked.add(pa)
    hits = sum(p in linked for p in eligible)
    return {
        "eligible": len(eligible),
        "linked": hits,
        "match_rate": hits / len(eligible) if eligible else 1.0,
    }


def format_report(report: CountReport, od: dict | None = None, mot: MotReport | None = None,
                  events: dict | None = None, xcam: dict | None = None) -> str:
    lines = [
        f"{'segment':<16}{'in pred/true':>14}{'out pred/true':>15}{'entry acc':>11}{'exit acc':>10}{'total acc':>11}",
    ]
    for key, s in sorted(report.segments.items()):
        lines.append(
            f"{key:<16}{f'{s.pred_entries}/{s.truth_entries}':>14}{f'{s.pred_exits}/{s.truth_exits}':>15}"
            f"{s.entry_accuracy:>11.3f}{s.exit_accuracy:>10.3f}{s.total_accuracy:>11.3f}"
        )
    lines.append(
        f"{'aggregate':<16}{'':>14}{'':>15}{report.entry_accuracy:>11.3f}"
        f"{report.exit_accuracy:>10.3f}{report.total_accuracy:>11.3f}"
    )
    lines.append(
        f"entry MAE {report.entry_mae:.2f}  exit MAE {report.exit_mae:.2f}  "
        f"complete misses {report.complete_misses}"
    )
    if events is not None:
        lines.append(
            f"events: precision {events['precision']:.3f}  recall {events['recall']:.3f}  f1 {events['f1']:.3f}"
        )
    if od is not None:
        lines.append(f"OD: exact cell match {od['exact_cell_match']:.3f}  L1 error {od['l1_error']}")
    if xcam is not None:
        lines.append(
            f"cross-camera match rate {xcam['match_rate']:.3f} ({xcam['linked']}/{xcam['eligible']})"
        )
    if mot is not None:
        if mot.available:
            lines.append(
                f"MOT: IDF1 {mot.idf1:.3f}  ID switches {mot.id_switches}  "
                f"fragmentation {mot.fragmentation}  detection F1 {mot.detection_f1:.3f}"
            )
        else:
            lines.append("MOT: unavailable (no detection-level ground truth)")
    return "\n".join(lines) + "\n"
