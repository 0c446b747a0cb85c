"""Appearance re-identification for tracks lost by geometric association.

Every matched track banks a short history of appearance embeddings in a
lookup table, keyed by the agent that produced the detection. When a track
later misses geometric association (occlusion, abrupt turns), its recent
embeddings are compared against the embeddings of unmatched detections:

* first against records the ego agent itself banked (threshold
  ``DEFAULT_EGO_THRESHOLD``),
* then against records banked from peer agents, which cover objects the
  ego agent never saw well (stricter ``DEFAULT_CROSS_AGENT_THRESHOLD``).

Matching is greedy best-first on cosine similarity, and only records newer
than the table's frame window participate, so stale appearance cannot
resurrect long-dead identities.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import Detection
from .errors import ValidationError

DEFAULT_WINDOW = 10
DEFAULT_CAPACITY = 10
DEFAULT_EGO_THRESHOLD = 0.8
DEFAULT_CROSS_AGENT_THRESHOLD = 0.85


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, 0.0 when either vector is degenerate."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        return 0.0
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom <= 0.0:
        return 0.0
    return float(np.dot(a, b) / denom)


@dataclass(frozen=True)
class EmbeddingRecord:
    """One banked appearance sample for a track."""

    frame: int
    agent_id: str
    track_id: int
    embedding: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.embedding, dtype=float)
        if vec.ndim != 1 or vec.size == 0:
            raise ValidationError("embedding", "must be a nonempty 1-d vector")
        if not np.isfinite(vec).all():
            raise ValidationError("embedding", "must be finite")
        norm = float(np.linalg.norm(vec))
        if norm <= 0.0:
            raise ValidationError("embedding", "must have positive norm")
        object.__setattr__(self, "embedding", vec / norm)


class FeatureLUT:
    """Ring-buffered appearance records keyed by (agent, track).

    ``window`` bounds how old a record may be (in frames) to be returned;
    ``capacity`` bounds how many records each (agent, track) key retains.
    """

    def __init__(self, window: int = DEFAULT_WINDOW, capacity: int = DEFAULT_CAPACITY):
        if window < 1:
            raise ValidationError("window", "must be >= 1")
        if capacity < 1:
            raise ValidationError("capacity", "must be >= 1")
        self.window = window
        self.capacity = capacity
        self._buffers: Dict[Tuple[str, int], Deque[EmbeddingRecord]] = {}

    def __len__(self) -> int:
        return sum(len(buf) for buf in self._buffers.values())

    def insert(self, record: EmbeddingRecord) -> None:
        key = (record.agent_id, record.track_id)
        buf = self._buffers.get(key)
        if buf is None:
            buf = deque(maxlen=self.capacity)
            self._buffers[key] = buf
        buf.append(record)

    def prune(self, frame: int) -> None:
        """Drop records older than the window relative to ``frame``."""
        dead = []
        for key, buf in self._buffers.items():
            while buf and frame - buf[0].frame > self.window:
                buf.popleft()
            if not buf:
                dead.append(key)
        for key in dead:
            del self._buffers[key]

    def drop_track(self, track_id: int) -> None:
        for key in [k for k in self._buffers if k[1] == track_id]:
            del self._buffers[key]

    def records_for(
        self, track_id: int, frame: int, ego_agent_id: str, from_ego: bool
    ) -> List[EmbeddingRecord]:
        """Window-fresh records for a track, split by banking agent.

        ``from_ego=True`` returns records the ego agent banked;
        ``from_ego=False`` returns records banked from peer agents.
        """
        out: List[EmbeddingRecord] = []
        for (agent_id, tid), buf in self._buffers.items():
            if tid != track_id or (agent_id == ego_agent_id) != from_ego:
                continue
            out.extend(r for r in buf if 0 <= frame - r.frame <= self.window)
        out.sort(key=lambda r: (r.frame, r.agent_id))
        return out

    def tracks_with_records(self) -> List[int]:
        return sorted({tid for (_, tid) in self._buffers})


class EmbeddingProvider:
    """Resolves a detection's embedding reference to a vector, or None."""

    def get(self, ref: Optional[str]) -> Optional[np.ndarray]:
        raise NotImplementedError


class NullProvider(EmbeddingProvider):
    """Appearance-free operation: every lookup misses."""

    def get(self, ref: Optional[str]) -> Optional[np.ndarray]:
        return None


class DictProvider(EmbeddingProvider):
    """In-memory reference -> vector mapping (simulator output)."""

    def __init__(self, table: Dict[str, np.ndarray]):
        self._table = {k: np.asarray(v, dtype=float) for k, v in table.items()}

    def get(self, ref: Optional[str]) -> Optional[np.ndarray]:
        if ref is None:
            return None
        return self._table.get(ref)

    def update(self, table: Dict[str, np.ndarray]) -> None:
        for key, vec in table.items():
            self._table[key] = np.asarray(vec, dtype=float)


class FileBackedProvider(EmbeddingProvider):
    """Lazy reader for a sidecar embedding file (header line + f32 rows)."""

    def __init__(self, path):
        self._path = path
        self._table: Optional[Dict[str, np.ndarray]] = None

    def _load(self) -> Dict[str, np.ndarray]:
        if self._table is None:
            from .fileio import read_embeddings

            self._table = read_embeddings(self._path)
        return self._table

    def get(self, ref: Optional[str]) -> Optional[np.ndarray]:
        if ref is None:
            return None
        return self._load().get(ref)


class ReidMatch(NamedTuple):
    """A recovered identity: detection ``det_index`` continues ``track_id``."""

    track_id: int
    det_index: int
    similarity: float
    source: str  # "ego" or "peer", by who banked the matched record


def _detection_vectors(
    dets: Sequence[Detection],
    det_indices: Sequence[int],
    provider: EmbeddingProvider,
) -> Dict[int, np.ndarray]:
    vectors: Dict[int, np.ndarray] = {}
    for det, idx in zip(dets, det_indices):
        vec = provider.get(det.embedding_ref)
        if vec is None:
            continue
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or not np.isfinite(vec).all():
            continue
        norm = float(np.linalg.norm(vec))
        if norm <= 0.0:
            continue
        vectors[idx] = vec / norm
    return vectors


def _greedy_stage(
    candidate_ids: Iterable[int],
    vectors: Dict[int, np.ndarray],
    lut: FeatureLUT,
    frame: int,
    ego_agent_id: str,
    from_ego: bool,
    threshold: float,
    source: str,
) -> List[ReidMatch]:
    scored: List[Tuple[float, int, int]] = []
    for tid in candidate_ids:
        records = lut.records_for(tid, frame, ego_agent_id, from_ego)
        if not records:
            continue
        bank = np.stack([r.embedding for r in records])
        for idx, vec in vectors.items():
            sim = float(np.max(bank @ vec))
            if sim >= threshold:
                scored.append((sim, tid, idx))
    scored.sort(key=lambda item: (-item[0], item[1], item[2]))
    used_tracks: set = set()
    used_dets: set = set()
    matches: List[ReidMatch] = []
    for sim, tid, idx in scored:
        if tid in used_tracks or idx in used_dets:
            continue
        used_tracks.add(tid)
        used_dets.add(idx)
        matches.append(ReidMatch(tid, idx, sim, source))
    return matches


def reid_match(
    candidate_ids: Sequence[int],
    dets: Sequence[Detection],
    det_indices: Sequence[int],
    lut: FeatureLUT,
    provider: EmbeddingProvider,
    frame: int,
    ego_agent_id: str,
    ego_threshold: float = DEFAULT_EGO_THRESHOLD,
    cross_agent_threshold: float = DEFAULT_CROSS_AGENT_THRESHOLD,
) -> List[ReidMatch]:
    """Recover lost identities by appearance, ego records before peers'.

    ``candidate_ids`` are tracks that failed geometric association this
    frame (including recently dead ones still inside the table window);
    ``dets``/``det_indices`` are the unmatched detections and their indices
    in the caller's frame-level detection list. Each stage matches greedily
    by descending similarity, and a pair claimed by the ego stage is gone
    before the peer stage runs.
    """
    vectors = _detection_vectors(dets, det_indices, provider)
    if not vectors:
        return []
    matches = _greedy_stage(
        candidate_ids, vectors, lut, frame, ego_agent_id, True, ego_threshold, "ego"
    )
    taken_tracks = {m.track_id for m in matches}
    taken_dets = {m.det_index for m in matches}
    remaining_ids = [t for t in candidate_ids if t not in taken_tracks]
    remaining_vectors = {i: v for i, v in vectors.items() if i not in taken_dets}
    matches.extend(
        _greedy_stage(
            remaining_ids,
            remaining_vectors,
            lut,
            frame,
            ego_agent_id,
            False,
            cross_agent_threshold,
            "peer",
        )
    )
    return matches
