"""Track-detection association.

Affinities are generalized 3D IoU, so thresholds may be negative. Matching
is two-staged by detection confidence: confident detections are matched
first at a strict threshold, the remaining tracks then get a second pass at
the low-confidence leftovers with a looser one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Detection, MatcherKind, Track
from .errors import ValidationError
from .geometry import giou3d
from .motion import state_box

HIGH_SCORE_THRESH = 0.5
STAGE_ONE_THRESH = -0.2
STAGE_TWO_THRESH = -0.5


@dataclass
class AffinityMatrix:
    """Dense track x detection affinity with id/index maps."""

    matrix: np.ndarray
    track_ids: List[int]
    det_indices: List[int]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.shape != (len(self.track_ids), len(self.det_indices)):
            raise ValidationError("matrix", "shape does not match id maps")
        if self.matrix.size and not np.isfinite(self.matrix).all():
            raise ValidationError("matrix", "affinities must be finite")


@dataclass
class MatchResult:
    """Assignment outcome: (track_id, det_index, affinity) triplets plus
    leftovers. Each track and each detection appears at most once."""

    pairs: List[Tuple[int, int, float]] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)
    unmatched_dets: List[int] = field(default_factory=list)


def build_affinity(tracks: Sequence[Track], dets: Sequence[Detection]) -> AffinityMatrix:
    """Pairwise giou3d between predicted track boxes and detection boxes."""
    mat = np.zeros((len(tracks), len(dets)))
    det_boxes = [d.box for d in dets]
    for i, trk in enumerate(tracks):
        tbox = state_box(trk.state)
        for j, dbox in enumerate(det_boxes):
            mat[i, j] = giou3d(tbox, dbox)
    return AffinityMatrix(mat, [t.id for t in tracks], list(range(len(dets))))


def hungarian(aff: AffinityMatrix) -> MatchResult:
    """Optimal assignment maximizing total affinity.

    Rectangular matrices are handled directly; every row or column beyond
    min(n, m) stays unmatched.
    """
    n, m = aff.matrix.shape
    if n == 0 or m == 0:
        return MatchResult([], list(aff.track_ids), list(aff.det_indices))
    rows, cols = linear_sum_assignment(aff.matrix, maximize=True)
    pairs = [
        (aff.track_ids[r], aff.det_indices[c], float(aff.matrix[r, c]))
        for r, c in zip(rows, cols)
    ]
    used_r, used_c = set(rows.tolist()), set(cols.tolist())
    return MatchResult(
        pairs,
        [tid for i, tid in enumerate(aff.track_ids) if i not in used_r],
        [di for j, di in enumerate(aff.det_indices) if j not in used_c],
    )


def greedy(aff: AffinityMatrix) -> MatchResult:
    """Repeatedly take the globally best remaining pair.

    Ties resolve to the lower track row first, then the lower detection
    column, matching a row-major argmax scan.
    """
    n, m = aff.matrix.shape
    if n == 0 or m == 0:
        return MatchResult([], list(aff.track_ids), list(aff.det_indices))
    work = aff.matrix.copy()
    pairs = []
    for _ in range(min(n, m)):
        flat = int(np.argmax(work))
        r, c = divmod(flat, m)
        if work[r, c] == -np.inf:
            break
        pairs.append((aff.track_ids[r], aff.det_indices[c], float(aff.matrix[r, c])))
        work[r, :] = -np.inf
        work[:, c] = -np.inf
    used_t = {p[0] for p in pairs}
    used_d = {p[1] for p in pairs}
    return MatchResult(
        pairs,
        [tid for tid in aff.track_ids if tid not in used_t],
        [di for di in aff.det_indices if di not in used_d],
    )


def _solve(aff: AffinityMatrix, kind: MatcherKind) -> MatchResult:
    return hungarian(aff) if kind is MatcherKind.HUNGARIAN else greedy(aff)


def _subset_affinity(
    tracks: Sequence[Track],
    dets: Sequence[Detection],
    det_indices: Sequence[int],
) -> AffinityMatrix:
    aff = build_affinity(tracks, [dets[i] for i in det_indices])
    aff.det_indices = list(det_indices)
    return aff


def associate_two_stage(
    tracks: Sequence[Track],
    dets: Sequence[Detection],
    matcher: MatcherKind,
    high_score_thresh: float = HIGH_SCORE_THRESH,
    stage_one_thresh: float = STAGE_ONE_THRESH,
    stage_two_thresh: float = STAGE_TWO_THRESH,
) -> MatchResult:
    """Confidence-cascaded association for a single class.

    Stage one runs all tracks against detections scoring at least
    ``high_score_thresh`` and keeps pairs with affinity >= ``stage_one_thresh``;
    demoted tracks join the second stage against the low-score leftovers at
    ``stage_two_thresh``. Low-affinity confident detections are not retried:
    they leave as unmatched and typically seed new tracks.
    """
    if stage_two_thresh > stage_one_thresh:
        raise ValidationError(
            "stage_two_thresh", "must not exceed the stage-one threshold"
        )
    by_id: Dict[int, Track] = {t.id: t for t in tracks}
    high = [i for i, d in enumerate(dets) if d.score >= high_score_thresh]
    low = [i for i, d in enumerate(dets) if d.score < high_score_thresh]

    result = MatchResult()
    first = _solve(_subset_affinity(tracks, dets, high), matcher)
    leftover_tracks: List[int] = list(first.unmatched_tracks)
    for tid, di, score in first.pairs:
        if score >= stage_one_thresh:
            result.pairs.append((tid, di, score))
        else:
            leftover_tracks.append(tid)
            result.unmatched_dets.append(di)
    result.unmatched_dets.extend(first.unmatched_dets)

    remaining = [by_id[tid] for tid in sorted(leftover_tracks)]
    second = _solve(_subset_affinity(remaining, dets, low), matcher)
    for tid, di, score in second.pairs:
        if score >= stage_two_thresh:
            result.pairs.append((tid, di, score))
        else:
            result.unmatched_tracks.append(tid)
            result.unmatched_dets.append(di)
    result.unmatched_tracks.extend(second.unmatched_tracks)
    result.unmatched_dets.extend(second.unmatched_dets)

    result.unmatched_tracks.sort()
    result.unmatched_dets.sort()
    return result
