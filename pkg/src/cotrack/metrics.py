"""Detection and tracking evaluation.

Tracking quality follows the CLEAR-MOT scheme: per frame, ground truth and
predictions are matched one-to-one by Hungarian assignment maximizing 3D
IoU, pairs below an overlap floor are discarded, and an identity switch is
counted whenever a ground-truth object's matched track id differs from its
most recent previous match. On top of the single-pass MOTA/MOTP/IDSW
counts, the recall-swept family (AMOTA, sAMOTA, AMOTP) re-evaluates the
sequence at confidence thresholds chosen to step through recall levels,
and detection quality is scored as interpolated average precision.

Undefined metrics (no ground truth, no matches, too few recall points)
raise ``UndefinedMetricError`` instead of returning silent zeros.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Box3D
from .errors import UndefinedMetricError
from .geometry import iou3d

DEFAULT_OVERLAP_FLOOR = 0.25
DEFAULT_RECALL_POINTS = 40
AP_IOU_THRESHOLDS = (0.3, 0.5)


class MotSample(NamedTuple):
    """One box observation: a ground-truth object or a track output."""

    frame: int
    obj_id: object
    box: Box3D
    score: float = 1.0


@dataclass
class FrameEval:
    """Per-frame counts and the overlaps of matched pairs."""

    frame: int
    tp: int = 0
    fp: int = 0
    fn: int = 0
    gt: int = 0
    idsw: int = 0
    overlaps: List[float] = field(default_factory=list)


@dataclass
class EvalCounts:
    """Cumulative counts over a sequence plus the per-frame breakdown."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    gt: int = 0
    idsw: int = 0
    overlap_sum: float = 0.0
    match_count: int = 0
    tp_scores: List[float] = field(default_factory=list)
    frames: List[FrameEval] = field(default_factory=list)

    def add(self, fr: FrameEval, scores: Sequence[float]) -> None:
        self.tp += fr.tp
        self.fp += fr.fp
        self.fn += fr.fn
        self.gt += fr.gt
        self.idsw += fr.idsw
        self.overlap_sum += sum(fr.overlaps)
        self.match_count += len(fr.overlaps)
        self.tp_scores.extend(scores)
        self.frames.append(fr)


class PRPoint(NamedTuple):
    """One operating point of the precision-recall curve."""

    recall: float
    precision: float
    score: float


def match_frame(
    gt_boxes: Sequence[Box3D],
    pred_boxes: Sequence[Box3D],
    overlap_floor: float = DEFAULT_OVERLAP_FLOOR,
) -> List[Tuple[int, int, float]]:
    """One-to-one matching maximizing total 3D IoU.

    Returns (gt_index, pred_index, iou) triples; pairs whose IoU falls
    below ``overlap_floor`` are dropped from the assignment.
    """
    if not gt_boxes or not pred_boxes:
        return []
    ious = np.zeros((len(gt_boxes), len(pred_boxes)))
    for i, gt in enumerate(gt_boxes):
        for j, pred in enumerate(pred_boxes):
            ious[i, j] = iou3d(gt, pred)
    rows, cols = linear_sum_assignment(ious, maximize=True)
    out = []
    for i, j in zip(rows, cols):
        if ious[i, j] >= overlap_floor:
            out.append((int(i), int(j), float(ious[i, j])))
    return out


def _group_by_frame(samples: Iterable[MotSample]) -> Dict[int, List[MotSample]]:
    grouped: Dict[int, List[MotSample]] = {}
    for s in samples:
        grouped.setdefault(s.frame, []).append(s)
    return grouped


def evaluate_sequence(
    gt: Iterable[MotSample],
    preds: Iterable[MotSample],
    overlap_floor: float = DEFAULT_OVERLAP_FLOOR,
) -> EvalCounts:
    """Frame-by-frame CLEAR-MOT bookkeeping for a single class.

    Identity switches compare each ground-truth object's matched track id
    against its most recent previous match; frames where the object went
    unmatched do not reset that memory.
    """
    gt_frames = _group_by_frame(gt)
    pred_frames = _group_by_frame(preds)
    counts = EvalCounts()
    last_match: Dict[object, object] = {}
    for frame in sorted(set(gt_frames) | set(pred_frames)):
        gts = gt_frames.get(frame, [])
        prs = pred_frames.get(frame, [])
        matches = match_frame(
            [g.box for g in gts], [p.box for p in prs], overlap_floor
        )
        fr = FrameEval(frame=frame, gt=len(gts))
        fr.tp = len(matches)
        fr.fp = len(prs) - len(matches)
        fr.fn = len(gts) - len(matches)
        scores = []
        for gi, pi, overlap in matches:
            gid = gts[gi].obj_id
            tid = prs[pi].obj_id
            if gid in last_match and last_match[gid] != tid:
                fr.idsw += 1
            last_match[gid] = tid
            fr.overlaps.append(overlap)
            scores.append(prs[pi].score)
        counts.add(fr, scores)
    return counts


def mota(counts: EvalCounts) -> float:
    """1 - (FP + FN + IDSW) / GT; may be negative."""
    if counts.gt <= 0:
        raise UndefinedMetricError("MOTA undefined with no ground truth")
    return 1.0 - (counts.fp + counts.fn + counts.idsw) / counts.gt


def motp(counts: EvalCounts) -> float:
    """Mean matched-pair overlap; in [0, 1] for IoU overlaps."""
    if counts.match_count <= 0:
        raise UndefinedMetricError("MOTP undefined with no matched pairs")
    return counts.overlap_sum / counts.match_count


def get_thresholds(
    scores: Sequence[float], num_gt: int, num_points: int = DEFAULT_RECALL_POINTS
) -> List[float]:
    """Confidence thresholds stepping through evenly spaced recall levels.

    ``scores`` are the confidences of true-positive predictions from a
    full-output evaluation pass. The walk keeps a score when its recall is
    the closest achievable to the next target level, so the returned list
    may repeat a score and may hold fewer than ``num_points`` entries.
    """
    if num_gt <= 0:
        raise UndefinedMetricError("recall undefined with no ground truth")
    ordered = sorted(scores, reverse=True)
    thresholds: List[float] = []
    current_recall = 0.0
    for i, score in enumerate(ordered):
        l_recall = (i + 1) / num_gt
        r_recall = (i + 2) / num_gt if i < len(ordered) - 1 else l_recall
        if (r_recall - current_recall) < (current_recall - l_recall) and i < len(
            ordered
        ) - 1:
            continue
        thresholds.append(score)
        current_recall += 1.0 / (num_points - 1.0)
    return thresholds


@dataclass
class ThresholdEval:
    """Sequence evaluation restricted to predictions at one confidence."""

    threshold: float
    recall: float
    mota: float
    smota: float
    motp: float
    counts: EvalCounts


@dataclass
class AmotaResult:
    """Recall-averaged tracking metrics plus the per-threshold trace."""

    amota: float
    samota: float
    amotp: float
    thresholds: List[float]
    per_threshold: List[ThresholdEval]


def amota_family(
    gt: Sequence[MotSample],
    preds: Sequence[MotSample],
    overlap_floor: float = DEFAULT_OVERLAP_FLOOR,
    num_points: int = DEFAULT_RECALL_POINTS,
) -> AmotaResult:
    """AMOTA, sAMOTA, and AMOTP averaged over the generated thresholds.

    sMOTA at recall r scales out the unavoidable misses:
    max(0, 1 - (FP + FN + IDSW - (1 - r) * GT) / (r * GT)).
    """
    gt = list(gt)
    preds = list(preds)
    full = evaluate_sequence(gt, preds, overlap_floor)
    if full.gt <= 0:
        raise UndefinedMetricError("AMOTA undefined with no ground truth")
    thresholds = get_thresholds(full.tp_scores, full.gt, num_points)
    if len(thresholds) < 2:
        raise UndefinedMetricError(
            "AMOTA needs at least 2 recall points, got %d" % len(thresholds)
        )
    evals: List[ThresholdEval] = []
    for thresh in thresholds:
        kept = [p for p in preds if p.score >= thresh]
        counts = evaluate_sequence(gt, kept, overlap_floor)
        recall = counts.tp / counts.gt
        if recall <= 0.0 or counts.match_count == 0:
            raise UndefinedMetricError(
                "no matches at threshold %.6f" % thresh
            )
        mota_r = 1.0 - (counts.fp + counts.fn + counts.idsw) / counts.gt
        smota_r = max(
            0.0,
            1.0
            - (counts.fp + counts.fn + counts.idsw - (1.0 - recall) * counts.gt)
            / (recall * counts.gt),
        )
        evals.append(
            ThresholdEval(
                threshold=thresh,
                recall=recall,
                mota=mota_r,
                smota=smota_r,
                motp=counts.overlap_sum / counts.match_count,
                counts=counts,
            )
        )
    n = float(len(evals))
    return AmotaResult(
        amota=sum(e.mota for e in evals) / n,
        samota=sum(e.smota for e in evals) / n,
        amotp=sum(e.motp for e in evals) / n,
        thresholds=thresholds,
        per_threshold=evals,
    )


def average_precision(
    dets: Sequence[MotSample],
    gts: Sequence[MotSample],
    iou_thresh: float,
    num_points: int = DEFAULT_RECALL_POINTS,
) -> Tuple[float, List[PRPoint]]:
    """Interpolated AP with greedy score-ordered assignment.

    Detections are visited by descending score; each claims the highest
    IoU still-unclaimed ground-truth box in its frame, counting as a true
    positive only when that IoU reaches ``iou_thresh``. Precision is then
    interpolated at ``num_points`` evenly spaced recall levels.
    """
    if not gts:
        raise UndefinedMetricError("AP undefined with no ground truth")
    gt_frames = _group_by_frame(gts)
    claimed: Dict[int, List[bool]] = {f: [False] * len(g) for f, g in gt_frames.items()}
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].frame, i))
    tp = 0
    points: List[PRPoint] = []
    for rank, i in enumerate(order, start=1):
        det = dets[i]
        best_iou, best_j = 0.0, -1
        for j, g in enumerate(gt_frames.get(det.frame, [])):
            if claimed[det.frame][j]:
                continue
            overlap = iou3d(g.box, det.box)
            if overlap > best_iou:
                best_iou, best_j = overlap, j
        if best_j >= 0 and best_iou >= iou_thresh:
            claimed[det.frame][best_j] = True
            tp += 1
        points.append(PRPoint(tp / len(gts), tp / rank, det.score))
    recall_levels = np.linspace(1.0 / num_points, 1.0, num_points)
    ap = 0.0
    for level in recall_levels:
        precisions = [p.precision for p in points if p.recall >= level - 1e-12]
        ap += max(precisions) if precisions else 0.0
    return ap / num_points, points


def mean_average_precision(per_class_ap: Mapping[str, float]) -> float:
    """Plain mean of per-class APs."""
    if not per_class_ap:
        raise UndefinedMetricError("mAP undefined with no classes")
    values = list(per_class_ap.values())
    return float(sum(values) / len(values))
