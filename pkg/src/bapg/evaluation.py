"""Temporal IoU, proposal recall, detection mAP and boundary-error diagnostics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError
from .io import fmt
from .proposal import sort_proposals

THUMOS_THRESHOLDS = (0.3, 0.4, 0.5, 0.6, 0.7)
ANET_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Detection:
    video_id: str
    t_s: float
    t_e: float
    label: str
    score: float

    def __post_init__(self):
        if not self.t_s < self.t_e:
            raise ValidationError(f"{self.video_id}: detection needs t_s < t_e")
        if not np.isfinite(self.score):
            raise ValidationError(f"{self.video_id}: detection score must be finite")


@dataclass(frozen=True)
class EvalReport:
    metric: str
    values: dict[float, float]
    average: float
    num_gt: int
    num_predictions: int
    excluded_classes: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class APResult:
    per_class: dict[str, float]
    mean_ap: float
    excluded_classes: tuple[str, ...]


def temporal_iou(a, b) -> float:
    (a0, a1), (b0, b1) = a, b
    if not (a0 < a1 and b0 < b1):
        raise ValidationError(f"invalid interval in tIoU: {a}, {b}")
    inter = max(0.0, min(a1, b1) - max(a0, b0))
    union = max(a1, b1) - min(a0, b0) if inter > 0 else (a1 - a0) + (b1 - b0)
    return inter / union


def _check_threshold(threshold):
    if not 0 < threshold <= 1:
        raise ValidationError(f"tIoU threshold must lie in (0, 1], got {threshold}")


def _by_video(items):
    out = defaultdict(list)
    for it in items:
        out[it.video_id].append(it)
    return out


def _greedy_match(preds, gt_intervals, threshold):
    """Score-ordered greedy matching; ``preds`` must already be sorted.

    Returns ``(pred_index, gt_index)`` pairs. Each prediction takes the
    unmatched ground truth of highest IoU (lowest index on ties) if that IoU
    reaches the threshold.
    """
    taken = [False] * len(gt_intervals)
    pairs = []
    for i, p in enumerate(preds):
        best, best_j = -1.0, -1
        for j, g in enumerate(gt_intervals):
            if taken[j]:
                continue
            iou = temporal_iou((p.t_s, p.t_e), g)
            if iou > best:
                best, best_j = iou, j
        if best_j >= 0 and best >= threshold:
            taken[best_j] = True
            pairs.append((i, best_j))
    return pairs


def _matched_pairs(proposals, gt, threshold, top_n):
    props = _by_video(proposals)
    for ann in sorted(gt, key=lambda a: a.video_id):
        preds = sort_proposals(props.get(ann.video_id, []))
        if top_n is not None:
            preds = preds[:top_n]
        intervals = [(i.t_s, i.t_e) for i in ann.instances]
        for i, j in _greedy_match(preds, intervals, threshold):
            yield preds[i], ann.instances[j]


def average_recall(proposals, gt, threshold: float, top_n: int | None = None) -> float:
    """Fraction of ground-truth instances matched by a top-``top_n`` proposal of their video."""
    _check_threshold(threshold)
    if top_n is not None and top_n < 1:
        raise ValidationError("top_n must be >= 1")
    num_gt = sum(len(a.instances) for a in gt)
    if num_gt == 0:
        raise ValidationError("recall is undefined without ground-truth instances")
    return sum(1 for _ in _matched_pairs(proposals, gt, threshold, top_n)) / num_gt


def boundary_error(proposals, gt, threshold: float, top_n: int | None = None):
    """Mean ``|dt_s|`` and ``|dt_e|`` (seconds) over matched pairs, or ``None`` if nothing matched."""
    _check_threshold(threshold)
    pairs = list(_matched_pairs(proposals, gt, threshold, top_n))
    if not pairs:
        return None
    ds = np.array([abs(p.t_s - g.t_s) for p, g in pairs])
    de = np.array([abs(p.t_e - g.t_e) for p, g in pairs])
    return float(ds.mean()), float(de.mean())


def interpolated_ap(tp: np.ndarray, num_gt: int) -> float:
    """All-point interpolated AP from a score-ordered TP indicator array."""
    if num_gt == 0:
        raise ValidationError("AP is undefined without ground truth")
    if tp.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1 - tp)
    recall = np.concatenate([[0.0], tp_cum / num_gt, [1.0]])
    precision = np.concatenate([[0.0], tp_cum / (tp_cum + fp_cum), [0.0]])
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.flatnonzero(recall[1:] != recall[:-1]) + 1
    return float(np.sum((recall[idx] - recall[idx - 1]) * precision[idx]))


def detection_average_precision(dets, gt, threshold: float) -> APResult:
    _check_threshold(threshold)
    gt_by_class = defaultdict(lambda: defaultdict(list))
    for ann in gt:
        for inst in ann.instances:
            gt_by_class[inst.label][ann.video_id].append((inst.t_s, inst.t_e))
    det_classes = {d.label for d in dets}
    per_class = {}
    for label in sorted(gt_by_class):
        per_video = gt_by_class[label]
        num_gt = sum(len(v) for v in per_video.values())
        cls_dets = sorted((d for d in dets if d.label == label),
                          key=lambda d: (-d.score, d.video_id, d.t_s, d.t_e))
        taken = {vid: [False] * len(v) for vid, v in per_video.items()}
        tp = np.zeros(len(cls_dets))
        for k, d in enumerate(cls_dets):
            best, best_j = -1.0, -1
            for j, g in enumerate(per_video.get(d.video_id, [])):
                if taken[d.video_id][j]:
                    continue
                iou = temporal_iou((d.t_s, d.t_e), g)
                if iou > best:
                    best, best_j = iou, j
            if best_j >= 0 and best >= threshold:
                taken[d.video_id][best_j] = True
                tp[k] = 1
        per_class[label] = interpolated_ap(tp, num_gt)
    mean_ap = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return APResult(per_class, mean_ap, tuple(sorted(det_classes - set(gt_by_class))))


def evaluate_over_thresholds(predictions, gt, thresholds=THUMOS_THRESHOLDS, top_n: int | None = None,
                             metric: str | None = None) -> EvalReport:
    """Per-threshold metric plus its arithmetic mean.

    ``metric`` is ``"mAP"`` for :class:`Detection` inputs and ``"recall"`` for
    :class:`Proposal` inputs; it is inferred when omitted (empty inputs
    default to recall).
    """
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise ValidationError("at least one tIoU threshold is required")
    predictions = list(predictions)
    if metric is None:
        metric = "mAP" if predictions and isinstance(predictions[0], Detection) else "recall"
    values = {}
    excluded: tuple[str, ...] = ()
    for th in thresholds:
        if metric == "mAP":
            res = detection_average_precision(predictions, gt, th)
            values[th] = res.mean_ap
            excluded = res.excluded_classes
        elif metric == "recall":
            values[th] = average_recall(predictions, gt, th, top_n)
        else:
            raise ValidationError(f"unknown metric {metric!r}")
    avg = float(np.mean(list(values.values())))
    num_gt = sum(len(a.instances) for a in gt)
    return EvalReport(metric, values, avg, num_gt, len(predictions), excluded)


def format_report(rows, percent: bool = True) -> str:
    """Side-by-side table: one row per ``(name, EvalReport)``, thresholds as columns, ``Avg.`` last."""
    rows = list(rows)
    if not rows:
        return ""
    thresholds = list(rows[0][1].values)
    scale = 100.0 if percent else 1.0
    width = max(len("Method"), *(len(name) for name, _ in rows))
    head = f"{'Method':<{width}} | " + " ".join(f"{t:>6g}" for t in thresholds) + f" | {'Avg.':>6}"
    lines = [head, "-" * len(head)]
    for name, rep in rows:
        if list(rep.values) != thresholds:
            raise ValidationError("all reports in one table must share the same thresholds")
        cells = " ".join(f"{rep.values[t] * scale:6.2f}" for t in thresholds)
        lines.append(f"{name:<{width}} | {cells} | {rep.average * scale:6.2f}")
    return "\n".join(lines) + "\n"


def format_detections(dets) -> str:
    return "".join(f"{d.video_id} {fmt(d.t_s)} {fmt(d.t_e)} {d.label} {fmt(d.score)}\n" for d in dets)


def parse_detections(text: str, path="") -> list[Detection]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) != 5:
            raise ValidationError(f"{path}:{lineno}: expected '<video_id> <t_s> <t_e> <label> <score>'")
        try:
            out.append(Detection(parts[0], float(parts[1]), float(parts[2]), parts[3], float(parts[4])))
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return out
