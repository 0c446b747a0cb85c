"""Core domain types: boxes, classes, detections, tracks, poses, cameras.

All spatial quantities are metric. Yaw is counter-clockwise about +z with 0
along +x and is kept in (-pi, pi]. Boxes are center parameterized with the
length axis along the heading.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from .errors import UnknownClassError, ValidationError

TAU = 2.0 * math.pi

# (width, length, height) templates used for defaults and clutter synthesis
CLASS_DIMS = {
    "Vehicle": (1.9, 4.5, 1.6),
    "Pedestrian": (0.65, 0.65, 1.75),
    "Truck": (2.5, 8.0, 3.2),
}


def wrap_angle(value: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    rem = math.remainder(value, TAU)
    if rem <= -math.pi:
        rem += TAU
    return rem


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box: center (x, y, z), extents (w, l, h), heading yaw."""

    x: float
    y: float
    z: float
    w: float
    l: float
    h: float
    yaw: float

    def volume(self) -> float:
        return self.w * self.l * self.h

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.x, self.y, self.z, self.w, self.l, self.h, self.yaw], dtype=float
        )


def validate_box(box: Box3D) -> Box3D:
    """Return a validated copy of ``box`` with yaw wrapped into (-pi, pi].

    Rejects non-finite fields and non-positive extents, naming the offending
    field. Validation is idempotent: a validated box passes unchanged.
    """
    for name in ("x", "y", "z", "w", "l", "h", "yaw"):
        val = getattr(box, name)
        if not math.isfinite(val):
            raise ValidationError(name, "must be finite, got %r" % (val,))
    for name in ("w", "l", "h"):
        val = getattr(box, name)
        if val <= 0.0:
            raise ValidationError(name, "must be positive, got %r" % (val,))
    return replace(box, yaw=wrap_angle(box.yaw))


class MotionModel(Enum):
    CV = "cv"
    CYRA = "cyra"


class MatcherKind(Enum):
    HUNGARIAN = "hungarian"
    GREEDY = "greedy"


@dataclass(frozen=True)
class ObjectClass:
    """Per-class tracking policy: motion model, lifecycle limits, matcher."""

    name: str
    motion_model: MotionModel
    matcher: MatcherKind
    base_max_age: float = 3.0
    min_hits: int = 3

    def __post_init__(self):
        if not self.name:
            raise ValidationError("name", "must be non-empty")
        if self.base_max_age < 1.0:
            raise ValidationError("base_max_age", "must be >= 1")
        if self.min_hits < 1:
            raise ValidationError("min_hits", "must be >= 1")

    def to_dict(self) -> dict:
        return {
            "motion_model": self.motion_model.value,
            "matcher": self.matcher.value,
            "base_max_age": self.base_max_age,
            "min_hits": self.min_hits,
        }

    @classmethod
    def from_dict(cls, name: str, data: dict) -> "ObjectClass":
        return cls(
            name=name,
            motion_model=MotionModel(data["motion_model"]),
            matcher=MatcherKind(data["matcher"]),
            base_max_age=float(data["base_max_age"]),
            min_hits=int(data["min_hits"]),
        )


class ClassRegistry:
    """Name -> ObjectClass table; round-trips losslessly through dicts."""

    def __init__(self, classes: Optional[List[ObjectClass]] = None):
        self._classes: Dict[str, ObjectClass] = {}
        for cls in classes or []:
            self.add(cls)

    def add(self, cls: ObjectClass) -> None:
        self._classes[cls.name] = cls

    def get(self, name: str) -> ObjectClass:
        try:
            return self._classes[name]
        except KeyError:
            raise UnknownClassError(
                "unknown object class %r (registered: %s)"
                % (name, sorted(self._classes))
            ) from None

    def __contains__(self, name: str) -> bool:
        return name in self._classes

    def names(self) -> List[str]:
        return sorted(self._classes)

    def __iter__(self):
        return iter(self._classes[n] for n in self.names())

    def __eq__(self, other) -> bool:
        return isinstance(other, ClassRegistry) and self._classes == other._classes

    def to_dict(self) -> dict:
        return {name: self._classes[name].to_dict() for name in self.names()}

    @classmethod
    def from_dict(cls, data: dict) -> "ClassRegistry":
        reg = cls()
        for name in data:
            reg.add(ObjectClass.from_dict(name, data[name]))
        return reg


def default_registry() -> ClassRegistry:
    """Registry with the stock classes.

    Vehicles and pedestrians run the turning (CYRA) filter, trucks the plain
    constant-velocity one; pedestrians associate greedily, the rest use the
    optimal assignment.
    """
    return ClassRegistry(
        [
            ObjectClass("Vehicle", MotionModel.CYRA, MatcherKind.HUNGARIAN),
            ObjectClass("Pedestrian", MotionModel.CYRA, MatcherKind.GREEDY),
            ObjectClass("Truck", MotionModel.CV, MatcherKind.HUNGARIAN),
        ]
    )


def class_config(name: str, registry: Optional[ClassRegistry] = None) -> ObjectClass:
    """Resolve a class name against ``registry`` (defaults when omitted)."""
    return (registry or default_registry()).get(name)


@dataclass(frozen=True)
class Detection:
    """Single-frame detection from one agent, in that agent's body frame."""

    frame: int
    agent_id: str
    obj_class: ObjectClass
    box: Box3D
    score: float
    embedding_ref: Optional[str] = None

    def __post_init__(self):
        if self.frame < 0:
            raise ValidationError("frame", "must be >= 0")
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError("score", "must lie in [0, 1], got %r" % self.score)
        validate_box(self.box)


@dataclass
class Track:
    """Mutable tracker-owned object hypothesis."""

    id: int
    obj_class: ObjectClass
    state: "object"  # motion.FilterState; typed loosely to avoid a cycle
    birth_frame: int
    hits: int = 1
    misses: int = 0
    confirmed: bool = False
    score: float = 0.0


@dataclass(frozen=True)
class AgentPose:
    """Rigid transform from an agent's body frame into the shared frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        trans = np.asarray(self.translation, dtype=float)
        if rot.shape != (3, 3):
            raise ValidationError("rotation", "expected 3x3, got %s" % (rot.shape,))
        if trans.shape != (3,):
            raise ValidationError("translation", "expected 3-vector")
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > 1e-9:
            raise ValidationError("rotation", "not orthonormal (|R'R - I| = %g)" % err)
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValidationError("rotation", "determinant must be +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "AgentPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def planar(cls, x: float, y: float, yaw: float, z: float = 0.0) -> "AgentPose":
        c, s = math.cos(yaw), math.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(rot, np.array([x, y, z]))

    def as_matrix(self) -> np.ndarray:
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat

    def inverse_matrix(self) -> np.ndarray:
        mat = np.eye(4)
        mat[:3, :3] = self.rotation.T
        mat[:3, 3] = -self.rotation.T @ self.translation
        return mat


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera attached to an agent.

    ``extrinsics`` maps points from the owning agent's body frame into the
    camera frame (z forward, x right, y down).
    """

    agent_id: str
    camera_index: int
    intrinsics: np.ndarray
    extrinsics: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        k = np.asarray(self.intrinsics, dtype=float)
        t = np.asarray(self.extrinsics, dtype=float)
        if k.shape != (3, 3):
            raise ValidationError("intrinsics", "expected 3x3")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ValidationError("intrinsics", "focal lengths must be positive")
        lower = np.array([k[1, 0], k[2, 0], k[2, 1]])
        if np.abs(lower).max() > 1e-12 or abs(k[0, 1]) > 1e-12:
            raise ValidationError("intrinsics", "must be upper triangular, zero skew")
        if abs(k[2, 2] - 1.0) > 1e-12:
            raise ValidationError("intrinsics", "K[2,2] must be 1")
        if t.shape != (4, 4):
            raise ValidationError("extrinsics", "expected 4x4")
        rot = t[:3, :3]
        if np.abs(rot.T @ rot - np.eye(3)).max() > 1e-9:
            raise ValidationError("extrinsics", "rotation block not orthonormal")
        if np.abs(t[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-12:
            raise ValidationError("extrinsics", "bottom row must be [0 0 0 1]")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("width/height", "image size must be positive")
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "extrinsics", t)


@dataclass(frozen=True)
class GroundTruthObject:
    object_id: int
    obj_class: ObjectClass
    box: Box3D


@dataclass
class FrameBundle:
    """Everything one timestep carries: detections, poses, cameras, truth.

    ``detections`` holds per-agent lists in each agent's own body frame.
    ``embeddings`` maps embedding keys referenced by this frame's detections
    to unit-norm vectors.
    """

    frame: int
    timestamp: float
    detections: Dict[str, List[Detection]]
    poses: Dict[str, AgentPose]
    cameras: Dict[str, List[CameraModel]] = field(default_factory=dict)
    ground_truth: List[GroundTruthObject] = field(default_factory=list)
    embeddings: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for agent in self.detections:
            if agent not in self.poses:
                raise ValidationError(
                    "detections", "agent %r has detections but no pose" % agent
                )


class IdSource:
    """Issues strictly increasing, never reused track ids."""

    def __init__(self, start: int = 1):
        self._next = start

    def take(self) -> int:
        value = self._next
        self._next += 1
        return value
