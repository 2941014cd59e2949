"""Frame- and segment-level evaluation: MoF, per-class temporal IoU,
frame-level macro F1, and mAP over temporal IoU thresholds.

Frame membership uses half-open intervals [start, end) so gapless
timelines partition frames uniquely. Detections carry no confidence here,
so mAP predictions default to score 1.0 with earlier-start tie-breaking;
ordering matters to AP and is therefore fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EvalError
from .timelines import Segment, Timeline

DEFAULT_MAP_THRESHOLDS = (0.3, 0.4, 0.5, 0.6, 0.7)


@dataclass(frozen=True)
class EvalReport:
    mof: float
    mean_iou: float
    f1: float
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class MapReport:
    thresholds: tuple[float, ...]
    ap_at: dict[float, float]
    avg_map: float


@dataclass(frozen=True)
class ScoredSegment:
    label: str
    start_s: float
    end_s: float
    score: float = 1.0


def frame_count(duration_s: float, fps: float) -> int:
    return max(int(round(duration_s * fps)), 0)


def frame_labels(timeline: Timeline, n_frames: int, fps: float) -> list[str | None]:
    """Label of each frame time i/fps, None where no segment covers it."""
    labels: list[str | None] = [None] * n_frames
    if n_frames == 0:
        return labels
    times = np.arange(n_frames) / fps
    for seg in timeline.segments:
        mask = (times >= seg.start_s) & (times < seg.end_s)
        for i in np.flatnonzero(mask):
            if labels[i] is None:
                labels[i] = seg.label
    return labels


def _check_durations(pred: Timeline, gt: Timeline, fps: float) -> None:
    if fps <= 0 or not math.isfinite(fps):
        raise EvalError(f"fps must be positive, got {fps}")
    if abs(pred.duration_s - gt.duration_s) > 1.0 / fps:
        raise EvalError(
            f"duration mismatch beyond one frame: pred {pred.duration_s} vs gt {gt.duration_s}"
        )


def mof(pred: Timeline, gt: Timeline, fps: float) -> float:
    """Fraction of frames whose predicted label matches the ground truth."""
    _check_durations(pred, gt, fps)
    n = frame_count(gt.duration_s, fps)
    if n == 0:
        raise EvalError("no frames to evaluate")
    p = frame_labels(pred, n, fps)
    g = frame_labels(gt, n, fps)
    return sum(1 for a, b in zip(p, g) if a == b) / n


def _merged(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _measure(intervals: list[tuple[float, float]]) -> float:
    return sum(b - a for a, b in intervals)


def _intersection(xs: list[tuple[float, float]], ys: list[tuple[float, float]]) -> float:
    total, i, j = 0.0, 0, 0
    while i < len(xs) and j < len(ys):
        lo = max(xs[i][0], ys[j][0])
        hi = min(xs[i][1], ys[j][1])
        if hi > lo:
            total += hi - lo
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return total


def _class_intervals(tl: Timeline, label: str) -> list[tuple[float, float]]:
    return _merged([(s.start_s, s.end_s) for s in tl.segments if s.label == label])


def iou_per_class(pred: Timeline, gt: Timeline) -> tuple[dict[str, float], float]:
    """Temporal IoU of per-class interval unions, in seconds.

    The mean covers exactly the classes present in the ground truth; a
    class missing from the prediction scores 0 and still counts.
    """
    classes = sorted({s.label for s in gt.segments})
    if not classes:
        raise EvalError("ground truth has no segments")
    per: dict[str, float] = {}
    for c in classes:
        p = _class_intervals(pred, c)
        g = _class_intervals(gt, c)
        inter = _intersection(p, g)
        union = _measure(p) + _measure(g) - inter
        per[c] = inter / union if union > 0 else 0.0
    return per, sum(per.values()) / len(per)


def frame_f1(pred: Timeline, gt: Timeline, fps: float) -> tuple[dict[str, dict[str, float]], float]:
    """Frame-level precision/recall/F1 per ground-truth class, macro-averaged.

    The class set is taken from the discretized ground-truth frames: a
    segment too short to cover any frame sample does not exist at the
    frame level, which keeps the pred==gt identity exact.
    """
    _check_durations(pred, gt, fps)
    n = frame_count(gt.duration_s, fps)
    if n == 0:
        raise EvalError("no frames to evaluate")
    p = frame_labels(pred, n, fps)
    g = frame_labels(gt, n, fps)
    classes = sorted({b for b in g if b is not None})
    if not classes:
        raise EvalError("ground truth covers no frames at this fps")
    per: dict[str, dict[str, float]] = {}
    for c in classes:
        tp = sum(1 for a, b in zip(p, g) if a == c and b == c)
        n_pred = sum(1 for a in p if a == c)
        n_gt = sum(1 for b in g if b == c)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gt if n_gt else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per[c] = {"precision": precision, "recall": recall, "f1": f1}
    macro = sum(v["f1"] for v in per.values()) / len(per)
    return per, macro


def evaluate_segmentation(pred: Timeline, gt: Timeline, fps: float) -> EvalReport:
    """Full segmentation report: MoF, mean IoU, macro F1, per-class detail."""
    mof_v = mof(pred, gt, fps)
    iou_map, mean_iou = iou_per_class(pred, gt)
    f1_map, macro_f1 = frame_f1(pred, gt, fps)
    empty = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    per_class = {
        c: {"iou": iou_map[c], **f1_map.get(c, empty)} for c in iou_map
    }
    return EvalReport(mof=mof_v, mean_iou=mean_iou, f1=macro_f1, per_class=per_class)


def temporal_iou(a: tuple[float, float], b: tuple[float, float]) -> float:
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def _interpolated_ap(precision: list[float], recall: list[float]) -> float:
    # All-points interpolation: monotone precision envelope integrated over
    # recall steps (the convention of the standard detection toolkits).
    mprec = np.concatenate(([0.0], precision, [0.0]))
    mrec = np.concatenate(([0.0], recall, [1.0]))
    for i in range(len(mprec) - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    idx = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[idx] - mrec[idx - 1]) * mprec[idx]))


def average_precision(
    predictions: list[ScoredSegment], gt_instances: list[Segment], threshold: float
) -> float:
    """AP for one class at one temporal IoU threshold.

    Predictions are ranked by score (ties: earlier start first) and matched
    greedily, one ground-truth instance each, to the unmatched instance
    with the highest IoU at or above the threshold.
    """
    n_gt = len(gt_instances)
    if n_gt == 0:
        raise EvalError("average_precision needs at least one ground-truth instance")
    ranked = sorted(predictions, key=lambda s: (-s.score, s.start_s, s.end_s))
    matched = [False] * n_gt
    tp, fp = [], []
    for p in ranked:
        best_iou, best_j = 0.0, -1
        for j, g in enumerate(gt_instances):
            if matched[j]:
                continue
            iou = temporal_iou((p.start_s, p.end_s), (g.start_s, g.end_s))
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= threshold:
            matched[best_j] = True
            tp.append(1)
            fp.append(0)
        else:
            tp.append(0)
            fp.append(1)
    if not tp:
        return 0.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(fp)
    precision = (ctp / (ctp + cfp)).tolist()
    recall = (ctp / n_gt).tolist()
    return _interpolated_ap(precision, recall)


def map_at(
    predictions: list[ScoredSegment],
    gt_instances: list[Segment],
    thresholds: tuple[float, ...] = DEFAULT_MAP_THRESHOLDS,
) -> MapReport:
    """Mean AP over classes with ground truth, at each threshold."""
    classes = sorted({g.label for g in gt_instances})
    if not classes:
        raise EvalError("mAP undefined: ground truth contains no instances")
    ap_at: dict[float, float] = {}
    for tau in thresholds:
        aps = []
        for c in classes:
            preds_c = [p for p in predictions if p.label == c]
            gts_c = [g for g in gt_instances if g.label == c]
            aps.append(average_precision(preds_c, gts_c, tau))
        ap_at[tau] = sum(aps) / len(aps)
    avg = sum(ap_at.values()) / len(ap_at)
    return MapReport(thresholds=tuple(thresholds), ap_at=ap_at, avg_map=avg)


def uniform_baseline(task_labels: list[str], duration_s: float) -> Timeline:
    """Partition the video into equal-length segments in label order."""
    if not task_labels:
        raise EvalError("need at least one label")
    if duration_s <= 0:
        raise EvalError(f"duration must be positive, got {duration_s}")
    n = len(task_labels)
    bounds = [duration_s * i / n for i in range(n + 1)]
    bounds[-1] = duration_s
    segments = [Segment(task_labels[i], bounds[i], bounds[i + 1]) for i in range(n)]
    return Timeline(duration_s=duration_s, segments=segments)
