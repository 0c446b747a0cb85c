"""Per-frame multi-class, multi-agent tracking orchestration.

Each step runs, in order: per-agent confidence filtering and class-wise
NMS; projection of every agent's detections into the shared frame and a
cross-agent NMS that merges duplicate observations of one object; motion
prediction of all tracks; per-class two-stage geometric association;
appearance re-identification over the leftovers (including recently dead
tracks still inside the embedding window); measurement updates and
embedding banking; births of tentative tracks; and the velocity-adaptive
death rule misses > A_c + alpha * speed.

Only confirmed tracks are emitted. The event log (births, confirmations,
deaths, recoveries) is deterministic and replayable: track counts can be
reconstructed from it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .association import (
    HIGH_SCORE_THRESH,
    STAGE_ONE_THRESH,
    STAGE_TWO_THRESH,
    associate_two_stage,
)
from .core import (
    Box3D,
    ClassRegistry,
    Detection,
    FrameBundle,
    IdSource,
    Track,
    default_registry,
)
from .errors import ValidationError
from .geometry import nms, transform_box
from .motion import NoiseConfig, init_state, predict, speed, state_box, update
from .reid import (
    DEFAULT_CROSS_AGENT_THRESHOLD,
    DEFAULT_EGO_THRESHOLD,
    DEFAULT_WINDOW,
    EmbeddingProvider,
    EmbeddingRecord,
    FeatureLUT,
    NullProvider,
    reid_match,
)

DEFAULT_CONFIDENCE_FLOOR = 0.1
DEFAULT_NMS_IOU = 0.3
DEFAULT_ALPHA = 1.0


@dataclass(frozen=True)
class ReidConfig:
    """Appearance-recovery settings; enabled per class."""

    enabled: bool = True
    classes: Tuple[str, ...] = ("Pedestrian",)
    ego_threshold: float = DEFAULT_EGO_THRESHOLD
    cross_agent_threshold: float = DEFAULT_CROSS_AGENT_THRESHOLD
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if not -1.0 <= self.ego_threshold <= 1.0:
            raise ValidationError("ego_threshold", "must be in [-1, 1]")
        if not -1.0 <= self.cross_agent_threshold <= 1.0:
            raise ValidationError("cross_agent_threshold", "must be in [-1, 1]")
        if self.window < 1:
            raise ValidationError("window", "must be >= 1")

    def to_dict(self) -> dict:
        return {
            "enabled": self.enabled,
            "classes": list(self.classes),
            "ego_threshold": self.ego_threshold,
            "cross_agent_threshold": self.cross_agent_threshold,
            "window": self.window,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReidConfig":
        data = dict(data)
        data["classes"] = tuple(data.get("classes", ("Pedestrian",)))
        return cls(**data)


@dataclass(frozen=True)
class TrackerConfig:
    """Pipeline knobs; class-specific behavior comes from the registry."""

    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR
    nms_iou: float = DEFAULT_NMS_IOU
    nms_iou_per_class: Mapping[str, float] = field(default_factory=dict)
    alpha: float = DEFAULT_ALPHA
    high_score_thresh: float = HIGH_SCORE_THRESH
    stage_one_thresh: float = STAGE_ONE_THRESH
    stage_two_thresh: float = STAGE_TWO_THRESH
    reid: ReidConfig = field(default_factory=ReidConfig)
    registry: ClassRegistry = field(default_factory=default_registry)

    def __post_init__(self):
        if not 0.0 <= self.confidence_floor <= 1.0:
            raise ValidationError("confidence_floor", "must be in [0, 1]")
        if self.alpha < 0.0:
            raise ValidationError("alpha", "must be >= 0")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValidationError("nms_iou", "must be in (0, 1]")
        if self.stage_two_thresh > self.stage_one_thresh:
            raise ValidationError(
                "stage_two_thresh", "must not exceed stage_one_thresh"
            )
        for name in self.registry.names():
            if self.registry.get(name).base_max_age < 1.0:
                raise ValidationError("registry", "base_max_age must be >= 1")

    def class_nms_iou(self, obj_class: str) -> float:
        return self.nms_iou_per_class.get(obj_class, self.nms_iou)

    def to_dict(self) -> dict:
        return {
            "confidence_floor": self.confidence_floor,
            "nms_iou": self.nms_iou,
            "nms_iou_per_class": dict(self.nms_iou_per_class),
            "alpha": self.alpha,
            "high_score_thresh": self.high_score_thresh,
            "stage_one_thresh": self.stage_one_thresh,
            "stage_two_thresh": self.stage_two_thresh,
            "reid": self.reid.to_dict(),
            "registry": self.registry.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrackerConfig":
        data = dict(data)
        if "reid" in data:
            data["reid"] = ReidConfig.from_dict(data["reid"])
        if "registry" in data:
            data["registry"] = ClassRegistry.from_dict(data["registry"])
        return cls(**data)


@dataclass(frozen=True)
class TrackSnapshot:
    """One emitted (confirmed) track at one frame, in the world frame."""

    track_id: int
    obj_class: str
    box: Box3D
    speed: float
    score: float


@dataclass
class FrameOutput:
    """Confirmed tracks plus lifecycle events for one frame."""

    frame: int
    timestamp: float
    tracks: List[TrackSnapshot] = field(default_factory=list)
    events: List[dict] = field(default_factory=list)


@dataclass
class TrackerOutput:
    """Whole-run result: per-frame outputs in frame order."""

    frames: List[FrameOutput] = field(default_factory=list)

    def all_events(self) -> List[dict]:
        return [e for fr in self.frames for e in fr.events]

    def samples(self) -> List[Tuple[int, TrackSnapshot]]:
        return [(fr.frame, snap) for fr in self.frames for snap in fr.tracks]


def preprocess(
    dets: Sequence[Detection], cfg: TrackerConfig
) -> List[Detection]:
    """Confidence floor then per-class NMS for one agent's detections."""
    kept = [d for d in dets if d.score >= cfg.confidence_floor]
    out: List[Detection] = []
    for obj_class in sorted({d.obj_class for d in kept}):
        group = [d for d in kept if d.obj_class == obj_class]
        out.extend(nms(group, cfg.class_nms_iou(obj_class)))
    return out


def adaptive_max_age(track: Track, cfg: TrackerConfig) -> float:
    """Real-valued miss budget A_c(class) + alpha * current speed."""
    base = cfg.registry.get(track.obj_class).base_max_age
    return base + cfg.alpha * speed(track.state)


class MultiObjectTracker:
    """Stateful per-sequence tracker; feed frames in order via ``step``."""

    def __init__(
        self,
        cfg: Optional[TrackerConfig] = None,
        provider: Optional[EmbeddingProvider] = None,
        motion_noise: Optional[NoiseConfig] = None,
        ego_agent_id: str = "ego",
    ):
        self.cfg = cfg or TrackerConfig()
        self.provider = provider or NullProvider()
        self.motion_noise = motion_noise or NoiseConfig()
        self.ego_agent_id = ego_agent_id
        self.lut = FeatureLUT(self.cfg.reid.window, self.cfg.reid.window)
        self.live: List[Track] = []
        self.graveyard: Dict[int, Tuple[Track, int]] = {}
        self.ids = IdSource()
        self.last_frame: Optional[int] = None
        self.last_timestamp: Optional[float] = None

    # -- helpers ---------------------------------------------------------

    def _merged_world_detections(self, bundle: FrameBundle) -> List[Detection]:
        """Per-agent preprocess, world projection, cross-agent duplicate merge."""
        world: List[Detection] = []
        for agent_id in sorted(bundle.detections):
            pose = bundle.poses[agent_id]
            mat = pose.as_matrix()
            for det in preprocess(bundle.detections[agent_id], self.cfg):
                world.append(replace(det, box=transform_box(det.box, mat)))
        merged: List[Detection] = []
        for obj_class in sorted({d.obj_class for d in world}):
            group = [d for d in world if d.obj_class == obj_class]
            merged.extend(nms(group, self.cfg.class_nms_iou(obj_class)))
        return merged

    def _bank_embedding(self, frame: int, track: Track, det: Detection) -> None:
        vec = self.provider.get(det.embedding_ref)
        if vec is None:
            return
        arr = np.asarray(vec, dtype=float)
        if arr.ndim != 1 or not np.isfinite(arr).all() or np.linalg.norm(arr) <= 0:
            return
        self.lut.insert(EmbeddingRecord(frame, det.agent_id, track.id, arr))

    def _apply_detection(self, track: Track, det: Detection) -> None:
        track.state = update(
            track.state, det.box, self.motion_noise.r_diag(track.obj_class)
        )
        track.hits += 1
        track.misses = 0
        track.score = det.score

    def _confirm_if_due(self, track: Track, frame: int, events: List[dict]) -> None:
        min_hits = self.cfg.registry.get(track.obj_class).min_hits
        if not track.confirmed and track.hits >= min_hits:
            track.confirmed = True
            events.append(
                {
                    "frame": frame,
                    "event": "confirmed",
                    "track_id": track.id,
                    "obj_class": track.obj_class,
                }
            )

    # -- main step -------------------------------------------------------

    def step(self, bundle: FrameBundle) -> FrameOutput:
        frame = bundle.frame
        if self.last_frame is not None and frame != self.last_frame + 1:
            raise ValidationError(
                "frame", "expected %d, got %d" % (self.last_frame + 1, frame)
            )
        events: List[dict] = []
        dt = None
        if self.last_timestamp is not None:
            dt = bundle.timestamp - self.last_timestamp
            if dt <= 0.0:
                raise ValidationError("timestamp", "must increase between frames")

        # (1) preprocess + merge into the shared frame
        detections = self._merged_world_detections(bundle)

        # (2) predict every track, the recently dead included
        if dt is not None:
            for track in self.live:
                track.state = predict(
                    track.state, dt, self.motion_noise.for_class(track.obj_class)
                )
            for track, _ in self.graveyard.values():
                track.state = predict(
                    track.state, dt, self.motion_noise.for_class(track.obj_class)
                )

        classes = sorted(
            {d.obj_class for d in detections} | {t.obj_class for t in self.live}
        )
        for obj_class in classes:
            spec = self.cfg.registry.get(obj_class)
            tracks = sorted(
                (t for t in self.live if t.obj_class == obj_class), key=lambda t: t.id
            )
            dets = [d for d in detections if d.obj_class == obj_class]

            # (3) two-stage geometric association
            result = associate_two_stage(
                tracks,
                dets,
                spec.matcher,
                high_score_thresh=self.cfg.high_score_thresh,
                stage_one_thresh=self.cfg.stage_one_thresh,
                stage_two_thresh=self.cfg.stage_two_thresh,
            )
            by_id = {t.id: t for t in tracks}
            for track_id, det_index, _affinity in result.pairs:
                track = by_id[track_id]
                det = dets[det_index]
                self._apply_detection(track, det)
                self._confirm_if_due(track, frame, events)
                self._bank_embedding(frame, track, det)

            # (4) appearance recovery on the leftovers
            leftovers = list(result.unmatched_dets)
            recovered_dets: set = set()
            if (
                self.cfg.reid.enabled
                and obj_class in self.cfg.reid.classes
                and leftovers
            ):
                candidates = list(result.unmatched_tracks) + sorted(
                    tid
                    for tid, (t, _) in self.graveyard.items()
                    if t.obj_class == obj_class
                )
                matches = reid_match(
                    candidates,
                    [dets[i] for i in leftovers],
                    leftovers,
                    self.lut,
                    self.provider,
                    frame,
                    self.ego_agent_id,
                    self.cfg.reid.ego_threshold,
                    self.cfg.reid.cross_agent_threshold,
                )
                self._apply_recoveries(matches, by_id, dets, frame, events)
                recovered_dets = {m.det_index for m in matches}
                recovered_tracks = {m.track_id for m in matches}
            else:
                recovered_tracks = set()

            # (6) births for detections nobody claimed
            for det_index in leftovers:
                if det_index in recovered_dets:
                    continue
                det = dets[det_index]
                track = Track(
                    id=self.ids.take(),
                    obj_class=obj_class,
                    state=init_state(det.box, spec),
                    birth_frame=frame,
                    hits=1,
                    misses=0,
                    confirmed=False,
                    score=det.score,
                )
                self.live.append(track)
                events.append(
                    {
                        "frame": frame,
                        "event": "birth",
                        "track_id": track.id,
                        "obj_class": obj_class,
                    }
                )
                self._confirm_if_due(track, frame, events)
                self._bank_embedding(frame, track, det)

            # (7) deaths among tracks left unmatched and unrecovered
            for track_id in result.unmatched_tracks:
                if track_id in recovered_tracks:
                    continue
                track = by_id[track_id]
                track.misses += 1
                if track.misses > adaptive_max_age(track, self.cfg):
                    self.live.remove(track)
                    self.graveyard[track.id] = (track, frame)
                    events.append(
                        {
                            "frame": frame,
                            "event": "death",
                            "track_id": track.id,
                            "obj_class": obj_class,
                        }
                    )

        # expire the graveyard beyond the appearance window
        for tid in sorted(self.graveyard):
            _, died = self.graveyard[tid]
            if frame - died > self.cfg.reid.window:
                del self.graveyard[tid]
        self.lut.prune(frame)

        # (8) emit confirmed tracks
        out = FrameOutput(frame=frame, timestamp=bundle.timestamp, events=events)
        for track in sorted(self.live, key=lambda t: t.id):
            if not track.confirmed:
                continue
            out.tracks.append(
                TrackSnapshot(
                    track_id=track.id,
                    obj_class=track.obj_class,
                    box=state_box(track.state),
                    speed=speed(track.state),
                    score=track.score,
                )
            )
        self.last_frame = frame
        self.last_timestamp = bundle.timestamp
        return out

    def _apply_recoveries(
        self,
        matches,
        by_id: Dict[int, Track],
        dets: Sequence[Detection],
        frame: int,
        events: List[dict],
    ) -> None:
        """Route each recovery's detection into its historical track."""
        seen: set = set()
        for m in matches:
            if m.track_id in seen:
                raise ValidationError("recoveries", "track %d recovered twice" % m.track_id)
            seen.add(m.track_id)
            if m.track_id in by_id:
                track = by_id[m.track_id]
            elif m.track_id in self.graveyard:
                track, _ = self.graveyard.pop(m.track_id)
                self.live.append(track)
            else:
                raise ValidationError(
                    "recoveries", "unknown track %d" % m.track_id
                )
            det = dets[m.det_index]
            self._apply_detection(track, det)
            self._confirm_if_due(track, frame, events)
            self._bank_embedding(frame, track, det)
            events.append(
                {
                    "frame": frame,
                    "event": "recovery",
                    "track_id": track.id,
                    "obj_class": track.obj_class,
                    "similarity": m.similarity,
                    "source": m.source,
                    "det_agent": det.agent_id,
                }
            )

    def run(self, bundles: Sequence[FrameBundle]) -> TrackerOutput:
        output = TrackerOutput()
        for bundle in bundles:
            output.frames.append(self.step(bundle))
        return output


def baseline_config(cfg: Optional[TrackerConfig] = None) -> TrackerConfig:
    """Ablation preset: no velocity adaptation, no appearance recovery."""
    base = cfg or TrackerConfig()
    return replace(base, alpha=0.0, reid=replace(base.reid, enabled=False))
