"""Deterministic multi-agent scenario generator.

Produces ground truth, per-agent noisy detections (misses, clutter,
occlusion), camera rigs, and synthetic appearance embeddings. Every random
draw comes from a counter-based generator keyed by
(seed, frame, object, agent, purpose), so outputs are reproducible per
seed, independent of evaluation order, and adding an agent or object never
perturbs the streams of existing ones.

Objects follow scripted piecewise-constant (acceleration, yaw-rate)
segments integrated with the exact turning-arc step; pedestrians may
instead random-walk by resampling those controls on a fixed cadence. Each
object carries a fixed unit latent vector; an observed embedding is the
latent plus isotropic noise scaled so sigma_embed is the expected noise
norm, re-normalized, which keeps same-object observations far more similar
than cross-object ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    CLASS_DIMS,
    AgentPose,
    Box3D,
    CameraModel,
    ClassRegistry,
    Detection,
    FrameBundle,
    GroundTruthObject,
    default_registry,
    wrap_angle,
)
from .errors import UnknownClassError, ValidationError
from .geometry import bev_corners, iou3d, transform_box
from .motion import ctra_step

DEFAULT_DT = 0.1
DEFAULT_BOUNDS = (-100.0, -100.0, 100.0, 100.0)
DEFAULT_EMBED_DIM = 64
CLUTTER_KEY_BASE = 10_000
WALK_PERIOD = 10


class Purpose(IntEnum):
    """Randomness stream label, part of the generator key."""

    LATENT = 0
    VISIBILITY = 1
    BOXNOISE = 2
    CLUTTER = 3
    SCORE = 4
    EMBED = 5
    MOTION = 6


def keyed_rng(
    seed: int, frame: int, obj_key: int, agent_key: int, purpose: Purpose
) -> np.random.Generator:
    """Independent generator for one (frame, object, agent, purpose) cell."""
    seq = np.random.SeedSequence((seed, frame, obj_key, agent_key, int(purpose)))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class NoiseSpec:
    """Detection corruption model; all sigmas in meters/radians."""

    detect_base: float = 0.95
    distance_decay: float = 0.0  # meters; <= 0 disables distance falloff
    occlusion_penalty: float = 0.2
    sigma_pos: float = 0.1
    sigma_size: float = 0.05
    sigma_yaw: float = 0.02
    clutter_rate: float = 0.0
    sigma_embed: float = 0.1
    sigma_score: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.detect_base <= 1.0:
            raise ValidationError("detect_base", "must be in [0, 1]")
        if not 0.0 <= self.occlusion_penalty <= 1.0:
            raise ValidationError("occlusion_penalty", "must be in [0, 1]")
        for name in ("sigma_pos", "sigma_size", "sigma_yaw", "clutter_rate",
                     "sigma_embed", "sigma_score"):
            if getattr(self, name) < 0.0:
                raise ValidationError(name, "must be >= 0")

    def to_dict(self) -> dict:
        return {
            "detect_base": self.detect_base,
            "distance_decay": self.distance_decay,
            "occlusion_penalty": self.occlusion_penalty,
            "sigma_pos": self.sigma_pos,
            "sigma_size": self.sigma_size,
            "sigma_yaw": self.sigma_yaw,
            "clutter_rate": self.clutter_rate,
            "sigma_embed": self.sigma_embed,
            "sigma_score": self.sigma_score,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        return cls(**data)


@dataclass(frozen=True)
class MotionSegment:
    """Constant controls active from ``start_frame`` until the next segment."""

    start_frame: int
    accel: float = 0.0
    yaw_rate: float = 0.0

    def to_dict(self) -> dict:
        return {
            "start_frame": self.start_frame,
            "accel": self.accel,
            "yaw_rate": self.yaw_rate,
        }


@dataclass(frozen=True)
class ObjectSpec:
    """One scripted or random-walking object.

    ``blackouts`` are half-open frame windows in which every agent is
    forced to miss the object regardless of the visibility draw.
    """

    object_id: str
    obj_class: str
    x: float
    y: float
    yaw: float
    speed: float
    z: Optional[float] = None
    dims: Optional[Tuple[float, float, float]] = None  # (w, l, h)
    segments: Tuple[MotionSegment, ...] = (MotionSegment(0),)
    enter_frame: int = 0
    exit_frame: Optional[int] = None
    random_walk: bool = False
    walk_speed_range: Tuple[float, float] = (0.3, 2.0)
    walk_yaw_sigma: float = 0.8
    walk_accel_sigma: float = 0.3
    blackouts: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.speed < 0.0:
            raise ValidationError("speed", "must be >= 0")
        if self.enter_frame < 0:
            raise ValidationError("enter_frame", "must be >= 0")
        starts = [seg.start_frame for seg in self.segments]
        if starts != sorted(starts) or (starts and starts[0] != 0):
            raise ValidationError("segments", "must start at frame 0 and be sorted")
        for a, b in self.blackouts:
            if b <= a:
                raise ValidationError("blackouts", "windows must be nonempty")

    def body_dims(self) -> Tuple[float, float, float]:
        if self.dims is not None:
            return self.dims
        if self.obj_class not in CLASS_DIMS:
            raise UnknownClassError("no default dimensions for %r" % self.obj_class)
        return CLASS_DIMS[self.obj_class]

    def blacked_out(self, frame: int) -> bool:
        return any(a <= frame < b for a, b in self.blackouts)

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "obj_class": self.obj_class,
            "x": self.x,
            "y": self.y,
            "yaw": self.yaw,
            "speed": self.speed,
            "z": self.z,
            "dims": list(self.dims) if self.dims else None,
            "segments": [seg.to_dict() for seg in self.segments],
            "enter_frame": self.enter_frame,
            "exit_frame": self.exit_frame,
            "random_walk": self.random_walk,
            "walk_speed_range": list(self.walk_speed_range),
            "walk_yaw_sigma": self.walk_yaw_sigma,
            "walk_accel_sigma": self.walk_accel_sigma,
            "blackouts": [list(w) for w in self.blackouts],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectSpec":
        data = dict(data)
        data["segments"] = tuple(
            MotionSegment(**seg) for seg in data.get("segments", [{"start_frame": 0}])
        )
        if data.get("dims") is not None:
            data["dims"] = tuple(data["dims"])
        data["walk_speed_range"] = tuple(data.get("walk_speed_range", (0.3, 2.0)))
        data["blackouts"] = tuple(tuple(w) for w in data.get("blackouts", ()))
        return cls(**data)


@dataclass(frozen=True)
class AgentSpec:
    """One sensing agent: planar pose, optional drift, range, camera rig."""

    agent_id: str
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    sensor_range: float = 100.0
    n_cams: int = 4
    cam_height: float = 1.5
    focal: float = 400.0
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self):
        if self.sensor_range <= 0.0:
            raise ValidationError("sensor_range", "must be > 0")
        if self.n_cams < 1:
            raise ValidationError("n_cams", "must be >= 1")

    def pose_at(self, t: float) -> AgentPose:
        return AgentPose.planar(self.x + self.vx * t, self.y + self.vy * t, self.yaw)

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "x": self.x,
            "y": self.y,
            "yaw": self.yaw,
            "vx": self.vx,
            "vy": self.vy,
            "sensor_range": self.sensor_range,
            "n_cams": self.n_cams,
            "cam_height": self.cam_height,
            "focal": self.focal,
            "image_width": self.image_width,
            "image_height": self.image_height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AgentSpec":
        return cls(**data)


@dataclass(frozen=True)
class Scenario:
    """Complete deterministic recipe for a simulated sequence."""

    name: str
    seed: int
    duration: int
    agents: Tuple[AgentSpec, ...]
    objects: Tuple[ObjectSpec, ...]
    dt: float = DEFAULT_DT
    bounds: Tuple[float, float, float, float] = DEFAULT_BOUNDS
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    embed_dim: int = DEFAULT_EMBED_DIM

    def __post_init__(self):
        if self.seed < 0:
            raise ValidationError("seed", "must be >= 0")
        if self.duration < 1:
            raise ValidationError("duration", "must be >= 1")
        if self.dt <= 0.0:
            raise ValidationError("dt", "must be > 0")
        if self.embed_dim < 2:
            raise ValidationError("embed_dim", "must be >= 2")
        if not self.agents:
            raise ValidationError("agents", "at least one agent is required")
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValidationError("agents", "duplicate agent ids")
        oids = [o.object_id for o in self.objects]
        if len(set(oids)) != len(oids):
            raise ValidationError("objects", "duplicate object ids")
        xmin, ymin, xmax, ymax = self.bounds
        if xmax <= xmin or ymax <= ymin:
            raise ValidationError("bounds", "must span a positive area")
        horizon = (self.duration - 1) * self.dt
        for a in self.agents:
            for t in (0.0, horizon):
                px, py = a.x + a.vx * t, a.y + a.vy * t
                if not (xmin <= px <= xmax and ymin <= py <= ymax):
                    raise ValidationError(
                        "bounds", "agent %s leaves the world bounds" % a.agent_id
                    )

    def validate_classes(self, registry: ClassRegistry) -> None:
        for obj in self.objects:
            registry.get(obj.obj_class)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "duration": self.duration,
            "dt": self.dt,
            "bounds": list(self.bounds),
            "embed_dim": self.embed_dim,
            "noise": self.noise.to_dict(),
            "agents": [a.to_dict() for a in self.agents],
            "objects": [o.to_dict() for o in self.objects],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(
            name=data["name"],
            seed=data["seed"],
            duration=data["duration"],
            dt=data.get("dt", DEFAULT_DT),
            bounds=tuple(data.get("bounds", DEFAULT_BOUNDS)),
            embed_dim=data.get("embed_dim", DEFAULT_EMBED_DIM),
            noise=NoiseSpec.from_dict(data.get("noise", {})),
            agents=tuple(AgentSpec.from_dict(a) for a in data["agents"]),
            objects=tuple(ObjectSpec.from_dict(o) for o in data["objects"]),
        )


@dataclass
class _ObjectState:
    """Mutable integration state for one object."""

    x: float
    y: float
    yaw: float
    speed: float
    accel: float = 0.0
    yaw_rate: float = 0.0


def camera_rig(spec: AgentSpec) -> List[CameraModel]:
    """Evenly spread horizontal cameras on the agent body.

    Camera k looks along body yaw offset 2*pi*k/n; its frame is x right,
    y down, z forward, mounted ``cam_height`` above the body origin.
    """
    intr = np.array(
        [
            [spec.focal, 0.0, spec.image_width / 2.0],
            [0.0, spec.focal, spec.image_height / 2.0],
            [0.0, 0.0, 1.0],
        ]
    )
    rig = []
    for k in range(spec.n_cams):
        phi = 2.0 * math.pi * k / spec.n_cams
        forward = np.array([math.cos(phi), math.sin(phi), 0.0])
        right = np.array([math.sin(phi), -math.cos(phi), 0.0])
        down = np.array([0.0, 0.0, -1.0])
        rot = np.stack([right, down, forward])
        mount = np.array([0.0, 0.0, spec.cam_height])
        extr = np.eye(4)
        extr[:3, :3] = rot
        extr[:3, 3] = -rot @ mount
        rig.append(
            CameraModel(
                agent_id=spec.agent_id,
                camera_index=k,
                intrinsics=intr,
                extrinsics=extr,
                width=spec.image_width,
                height=spec.image_height,
            )
        )
    return rig


def latent_identity(scn: Scenario, obj_index: int) -> np.ndarray:
    """Fixed unit appearance vector for one object."""
    rng = keyed_rng(scn.seed, 0, obj_index + 1, 0, Purpose.LATENT)
    vec = rng.standard_normal(scn.embed_dim)
    return vec / np.linalg.norm(vec)


def _noisy_embedding(
    latent: np.ndarray, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """latent + noise with expected norm ``sigma``, re-normalized."""
    noise = rng.standard_normal(latent.size) * (sigma / math.sqrt(latent.size))
    vec = latent + noise
    return vec / np.linalg.norm(vec)


def _segment_controls(spec: ObjectSpec, frame: int) -> Tuple[float, float]:
    accel, yaw_rate = 0.0, 0.0
    for seg in spec.segments:
        if seg.start_frame <= frame:
            accel, yaw_rate = seg.accel, seg.yaw_rate
        else:
            break
    return accel, yaw_rate


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _segments_cross(p1, p2, q1, q2) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def _point_in_convex(point, corners) -> bool:
    n = len(corners)
    for i in range(n):
        if _orient(corners[i], corners[(i + 1) % n], point) < 0.0:
            return False
    return True


def ray_blocked(
    sensor_xy: Tuple[float, float], target_xy: Tuple[float, float], box: Box3D
) -> bool:
    """True when the sensor-to-target segment meets the box's BEV footprint."""
    corners = bev_corners(box)
    if _point_in_convex(target_xy, corners) or _point_in_convex(sensor_xy, corners):
        return True
    for i in range(4):
        if _segments_cross(sensor_xy, target_xy, corners[i], corners[(i + 1) % 4]):
            return True
    return False


def _ground_truth_boxes(scn: Scenario) -> List[List[Optional[Box3D]]]:
    """Per frame, per object-index ground-truth box (None outside lifetime)."""
    states: List[Optional[_ObjectState]] = [None] * len(scn.objects)
    out: List[List[Optional[Box3D]]] = []
    for frame in range(scn.duration):
        row: List[Optional[Box3D]] = []
        for idx, spec in enumerate(scn.objects):
            alive = spec.enter_frame <= frame and (
                spec.exit_frame is None or frame < spec.exit_frame
            )
            if not alive:
                states[idx] = None
                row.append(None)
                continue
            st = states[idx]
            if st is None:
                st = _ObjectState(spec.x, spec.y, spec.yaw, spec.speed)
                states[idx] = st
            if spec.random_walk:
                if frame > spec.enter_frame and (frame - spec.enter_frame) % WALK_PERIOD == 0:
                    rng = keyed_rng(scn.seed, frame, idx + 1, 0, Purpose.MOTION)
                    st.yaw_rate = rng.normal(0.0, spec.walk_yaw_sigma)
                    st.accel = rng.normal(0.0, spec.walk_accel_sigma)
            else:
                st.accel, st.yaw_rate = _segment_controls(spec, frame)
            w, l, h = spec.body_dims()
            z = spec.z if spec.z is not None else h / 2.0
            row.append(Box3D(st.x, st.y, z, w, l, h, wrap_angle(st.yaw)))
            st.x, st.y, st.yaw, st.speed = ctra_step(
                st.x, st.y, st.yaw, st.speed, st.accel, st.yaw_rate, scn.dt
            )
            lo, hi = spec.walk_speed_range
            if spec.random_walk:
                st.speed = min(max(st.speed, lo), hi)
        out.append(row)
    return out


def _detection_probability(
    scn: Scenario,
    frame: int,
    obj_index: int,
    agent_xy: Tuple[float, float],
    boxes: List[Optional[Box3D]],
    sensor_range: float,
) -> float:
    box = boxes[obj_index]
    dist = math.hypot(box.x - agent_xy[0], box.y - agent_xy[1])
    if dist > sensor_range:
        return 0.0
    p = scn.noise.detect_base
    if scn.noise.distance_decay > 0.0:
        p *= math.exp(-dist / scn.noise.distance_decay)
    for other_index, other in enumerate(boxes):
        if other is None or other_index == obj_index:
            continue
        if ray_blocked(agent_xy, (box.x, box.y), other):
            p *= scn.noise.occlusion_penalty
            break
    return p


def _noisy_box(box: Box3D, noise: NoiseSpec, rng: np.random.Generator) -> Box3D:
    dx, dy, dz = rng.normal(0.0, noise.sigma_pos, size=3) if noise.sigma_pos > 0 else (
        0.0,
        0.0,
        0.0,
    )
    dw, dl, dh = rng.normal(0.0, noise.sigma_size, size=3) if noise.sigma_size > 0 else (
        0.0,
        0.0,
        0.0,
    )
    dyaw = rng.normal(0.0, noise.sigma_yaw) if noise.sigma_yaw > 0 else 0.0
    return Box3D(
        box.x + dx,
        box.y + dy,
        box.z + dz,
        max(box.w + dw, 0.1),
        max(box.l + dl, 0.1),
        max(box.h + dh, 0.1),
        wrap_angle(box.yaw + dyaw),
    )


def _clutter_detections(
    scn: Scenario,
    frame: int,
    agent_index: int,
    agent: AgentSpec,
    inv_pose: np.ndarray,
    classes: Sequence[str],
    embeddings: Dict[str, np.ndarray],
) -> List[Detection]:
    if scn.noise.clutter_rate <= 0.0:
        return []
    count_rng = keyed_rng(scn.seed, frame, 0, agent_index + 1, Purpose.CLUTTER)
    count = int(count_rng.poisson(scn.noise.clutter_rate))
    dets: List[Detection] = []
    pose_t = agent.pose_at(frame * scn.dt)
    for k in range(count):
        obj_key = CLUTTER_KEY_BASE + k + 1
        attr = keyed_rng(scn.seed, frame, obj_key, agent_index + 1, Purpose.CLUTTER)
        angle = attr.uniform(-math.pi, math.pi)
        radius = attr.uniform(5.0, agent.sensor_range)
        cls_name = classes[int(attr.integers(len(classes)))]
        w, l, h = CLASS_DIMS[cls_name]
        scale = attr.uniform(0.8, 1.2)
        world = Box3D(
            pose_t.translation[0] + radius * math.cos(angle),
            pose_t.translation[1] + radius * math.sin(angle),
            h * scale / 2.0,
            w * scale,
            l * scale,
            h * scale,
            attr.uniform(-math.pi, math.pi),
        )
        score_rng = keyed_rng(scn.seed, frame, obj_key, agent_index + 1, Purpose.SCORE)
        score = float(score_rng.uniform(0.1, 0.6))
        embed_rng = keyed_rng(scn.seed, frame, obj_key, agent_index + 1, Purpose.EMBED)
        vec = embed_rng.standard_normal(scn.embed_dim)
        ref = "%d:%s:clutter%d" % (frame, agent.agent_id, k)
        embeddings[ref] = vec / np.linalg.norm(vec)
        dets.append(
            Detection(
                frame=frame,
                agent_id=agent.agent_id,
                obj_class=cls_name,
                box=transform_box(world, inv_pose),
                score=score,
                embedding_ref=ref,
            )
        )
    return dets


def generate(scn: Scenario, registry: Optional[ClassRegistry] = None) -> List[FrameBundle]:
    """Simulate the scenario into a frame-by-frame bundle stream.

    Detections are expressed in each agent's body frame; ground truth and
    poses are in the world frame. Embeddings ride alongside keyed by the
    detections' ``embedding_ref``.
    """
    registry = registry or default_registry()
    scn.validate_classes(registry)
    gt_boxes = _ground_truth_boxes(scn)
    latents = [latent_identity(scn, i) for i in range(len(scn.objects))]
    rigs = {a.agent_id: camera_rig(a) for a in scn.agents}
    clutter_classes = sorted({o.obj_class for o in scn.objects}) or registry.names()
    bundles: List[FrameBundle] = []
    for frame in range(scn.duration):
        t = frame * scn.dt
        boxes = gt_boxes[frame]
        poses = {a.agent_id: a.pose_at(t) for a in scn.agents}
        truth = [
            GroundTruthObject(spec.object_id, spec.obj_class, box)
            for spec, box in zip(scn.objects, boxes)
            if box is not None
        ]
        detections: Dict[str, List[Detection]] = {}
        embeddings: Dict[str, np.ndarray] = {}
        for agent_index, agent in enumerate(scn.agents):
            pose = poses[agent.agent_id]
            inv_pose = pose.inverse_matrix()
            agent_xy = (pose.translation[0], pose.translation[1])
            dets: List[Detection] = []
            for obj_index, spec in enumerate(scn.objects):
                box = boxes[obj_index]
                if box is None:
                    continue
                p = _detection_probability(
                    scn, frame, obj_index, agent_xy, boxes, agent.sensor_range
                )
                if p <= 0.0:
                    continue
                vis = keyed_rng(
                    scn.seed, frame, obj_index + 1, agent_index + 1, Purpose.VISIBILITY
                )
                detected = vis.uniform() < p
                if spec.blacked_out(frame):
                    detected = False
                if not detected:
                    continue
                noise_rng = keyed_rng(
                    scn.seed, frame, obj_index + 1, agent_index + 1, Purpose.BOXNOISE
                )
                noisy_world = _noisy_box(box, scn.noise, noise_rng)
                score_rng = keyed_rng(
                    scn.seed, frame, obj_index + 1, agent_index + 1, Purpose.SCORE
                )
                raw = iou3d(noisy_world, box) + (
                    score_rng.normal(0.0, scn.noise.sigma_score)
                    if scn.noise.sigma_score > 0
                    else 0.0
                )
                score = float(min(max(raw, 0.0), 1.0))
                embed_rng = keyed_rng(
                    scn.seed, frame, obj_index + 1, agent_index + 1, Purpose.EMBED
                )
                ref = "%d:%s:%s" % (frame, agent.agent_id, spec.object_id)
                embeddings[ref] = _noisy_embedding(
                    latents[obj_index], scn.noise.sigma_embed, embed_rng
                )
                dets.append(
                    Detection(
                        frame=frame,
                        agent_id=agent.agent_id,
                        obj_class=spec.obj_class,
                        box=transform_box(noisy_world, inv_pose),
                        score=score,
                        embedding_ref=ref,
                    )
                )
            dets.extend(
                _clutter_detections(
                    scn, frame, agent_index, agent, inv_pose, clutter_classes, embeddings
                )
            )
            detections[agent.agent_id] = dets
        bundles.append(
            FrameBundle(
                frame=frame,
                timestamp=t,
                detections=detections,
                poses=poses,
                cameras=rigs,
                ground_truth=truth,
                embeddings=embeddings,
            )
        )
    return bundles


def canned_scenarios() -> Dict[str, Scenario]:
    """Named scenarios, each built to provoke one tracking failure mode."""
    quiet = NoiseSpec(
        detect_base=1.0,
        distance_decay=0.0,
        occlusion_penalty=0.2,
        sigma_pos=0.05,
        sigma_size=0.02,
        sigma_yaw=0.01,
        clutter_rate=0.0,
        sigma_embed=0.1,
        sigma_score=0.03,
    )

    occlusion_crossing = Scenario(
        name="occlusion_crossing",
        seed=7,
        duration=100,
        agents=(AgentSpec("ego", x=0.0, y=-40.0, yaw=math.pi / 2),),
        objects=(
            ObjectSpec("truck0", "Truck", x=7.0, y=30.0, yaw=math.pi / 2, speed=0.0),
            ObjectSpec(
                "pedA",
                "Pedestrian",
                x=-5.5,
                y=23.5,
                yaw=0.0,
                speed=2.5,
                blackouts=((46, 54),),
            ),
            ObjectSpec(
                "pedB",
                "Pedestrian",
                x=19.5,
                y=24.5,
                yaw=math.pi,
                speed=2.5,
                blackouts=((46, 54),),
            ),
        ),
        noise=quiet,
    )

    fast_vehicle_gap = Scenario(
        name="fast_vehicle_gap",
        seed=11,
        duration=100,
        agents=(AgentSpec("ego", x=0.0, y=-20.0, yaw=math.pi / 2),),
        objects=(
            ObjectSpec(
                "veh0",
                "Vehicle",
                x=-45.0,
                y=0.0,
                yaw=0.0,
                speed=10.0,
                blackouts=((40, 50),),
            ),
        ),
        noise=quiet,
    )

    multi_agent_handoff = Scenario(
        name="multi_agent_handoff",
        seed=13,
        duration=100,
        agents=(
            AgentSpec("ego", x=0.0, y=0.0, yaw=0.0, sensor_range=28.0),
            AgentSpec("peer1", x=40.0, y=0.0, yaw=math.pi, sensor_range=28.0),
        ),
        objects=(
            ObjectSpec(
                "ped0",
                "Pedestrian",
                x=16.0,
                y=4.0,
                yaw=0.0,
                speed=2.0,
                segments=(
                    MotionSegment(0),
                    MotionSegment(70, yaw_rate=1.8),
                    MotionSegment(74),
                ),
                blackouts=((70, 78),),
            ),
        ),
        noise=quiet,
    )

    crowd_objects = []
    positions = [(x, y) for y in (-9.0, -3.0, 3.0, 9.0) for x in (-12.0, -6.0, 0.0, 6.0, 12.0)]
    for i, (x, y) in enumerate(positions):
        crowd_objects.append(
            ObjectSpec(
                "ped%02d" % i,
                "Pedestrian",
                x=x,
                y=y,
                yaw=wrap_angle(2.399963 * i),
                speed=1.0,
                random_walk=True,
            )
        )
    crowd = Scenario(
        name="crowd",
        seed=17,
        duration=80,
        agents=(AgentSpec("ego", x=0.0, y=-30.0, yaw=math.pi / 2),),
        objects=tuple(crowd_objects),
        noise=replace(quiet, clutter_rate=0.5),
    )

    mixed_classes = Scenario(
        name="mixed_classes",
        seed=23,
        duration=80,
        agents=(
            AgentSpec("ego", x=0.0, y=-25.0, yaw=math.pi / 2),
            AgentSpec("peer1", x=30.0, y=25.0, yaw=-math.pi / 2),
        ),
        objects=(
            ObjectSpec("veh0", "Vehicle", x=-50.0, y=-8.0, yaw=0.0, speed=8.0),
            ObjectSpec("veh1", "Vehicle", x=-40.0, y=0.0, yaw=0.0, speed=6.0),
            ObjectSpec("veh2", "Vehicle", x=-45.0, y=8.0, yaw=0.0, speed=7.0),
            ObjectSpec(
                "ped0", "Pedestrian", x=20.0, y=15.0, yaw=1.0, speed=1.2, random_walk=True
            ),
            ObjectSpec(
                "ped1", "Pedestrian", x=22.0, y=13.0, yaw=2.2, speed=1.0, random_walk=True
            ),
            ObjectSpec(
                "ped2", "Pedestrian", x=18.0, y=17.0, yaw=-1.4, speed=0.8, random_walk=True
            ),
            ObjectSpec(
                "ped3", "Pedestrian", x=24.0, y=16.0, yaw=0.4, speed=1.5, random_walk=True
            ),
            ObjectSpec("truck0", "Truck", x=10.0, y=-15.0, yaw=math.pi / 2, speed=0.0),
            ObjectSpec("truck1", "Truck", x=-60.0, y=16.0, yaw=0.0, speed=4.0),
        ),
        noise=replace(quiet, clutter_rate=0.2),
    )

    return {
        s.name: s
        for s in (
            occlusion_crossing,
            fast_vehicle_gap,
            multi_agent_handoff,
            crowd,
            mixed_classes,
        )
    }
