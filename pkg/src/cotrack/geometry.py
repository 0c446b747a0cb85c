"""Box geometry: rigid transforms, pinhole projection, rotated IoU/GIoU, NMS.

Overlap of oriented boxes is computed as (bird's-eye polygon intersection)
x (vertical extent overlap). The generalized variant subtracts the empty
fraction of the convex hull of both footprints, so it stays informative
(and negative) for disjoint boxes:

    giou = iou - (vol_hull - vol_union) / vol_hull

The polygon kernels run on plain floats; profiling showed numpy overhead
dominates at the 4-vertex scale the tracker hits in inner loops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import AgentPose, Box3D, CameraModel, Detection, wrap_angle
from .errors import BehindCameraError, ValidationError

DEPTH_EPS = 1e-6
MIN_VISIBLE_CORNERS = 2
MIN_CROP_AREA = 16.0
_AREA_EPS = 1e-12


@dataclass(frozen=True)
class Bbox2D:
    """Axis-aligned pixel box; extents are validated as non-degenerate."""

    agent_id: str
    camera_index: int
    u_min: float
    v_min: float
    u_max: float
    v_max: float

    def __post_init__(self):
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise ValidationError("bbox", "degenerate extent")

    def area(self) -> float:
        return (self.u_max - self.u_min) * (self.v_max - self.v_min)


def transform_point(transform: np.ndarray, point: Sequence[float]) -> np.ndarray:
    """Apply a rigid 4x4 transform to a 3D point: R p + t."""
    transform = np.asarray(transform, dtype=float)
    p = np.asarray(point, dtype=float)
    return transform[:3, :3] @ p + transform[:3, 3]


def transform_box(box: Box3D, transform: np.ndarray) -> Box3D:
    """Move an oriented box through a rigid transform.

    The heading is re-derived from the rotated heading vector, which assumes
    the rotation keeps boxes upright (rotations about z); extents are
    unchanged.
    """
    center = transform_point(transform, (box.x, box.y, box.z))
    heading = np.asarray(transform, dtype=float)[:3, :3] @ np.array(
        [math.cos(box.yaw), math.sin(box.yaw), 0.0]
    )
    yaw = math.atan2(heading[1], heading[0])
    return Box3D(center[0], center[1], center[2], box.w, box.l, box.h, wrap_angle(yaw))


def project_to_pixel(cam: CameraModel, point_cam: Sequence[float]) -> Tuple[float, float]:
    """Project a camera-frame point to pixels with explicit perspective division.

    With K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]] and p = (x, y, z):
    u = (fx * x + cx * z) / z, v = (fy * y + cy * z) / z. Points at or behind
    the image plane (z <= DEPTH_EPS) raise BehindCameraError.
    """
    x, y, z = (float(v) for v in point_cam)
    if z <= DEPTH_EPS:
        raise BehindCameraError("point depth %g is not in front of the camera" % z)
    k = cam.intrinsics
    u = (k[0, 0] * x + k[0, 2] * z) / z
    v = (k[1, 1] * y + k[1, 2] * z) / z
    return u, v


def box_corners(box: Box3D) -> np.ndarray:
    """All 8 corners, shape (8, 3). Order: bottom face CCW, then top face."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    hl, hw, hh = box.l / 2.0, box.w / 2.0, box.h / 2.0
    out = np.empty((8, 3))
    i = 0
    for dz in (-hh, hh):
        for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
            out[i] = (box.x + c * dx - s * dy, box.y + s * dx + c * dy, box.z + dz)
            i += 1
    return out


def bev_corners(box: Box3D) -> List[Tuple[float, float]]:
    """Footprint corners in the ground plane, counter-clockwise."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    hl, hw = box.l / 2.0, box.w / 2.0
    return [
        (box.x + c * hl - s * hw, box.y + s * hl + c * hw),
        (box.x - c * hl - s * hw, box.y - s * hl + c * hw),
        (box.x - c * hl + s * hw, box.y - s * hl - c * hw),
        (box.x + c * hl + s * hw, box.y + s * hl - c * hw),
    ]


def polygon_area(poly: Sequence[Tuple[float, float]]) -> float:
    """Shoelace area; positive for counter-clockwise vertex order."""
    n = len(poly)
    if n < 3:
        return 0.0
    total = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return abs(total) / 2.0


def clip_polygon(
    subject: Sequence[Tuple[float, float]], clip: Sequence[Tuple[float, float]]
) -> List[Tuple[float, float]]:
    """Sutherland-Hodgman clip of ``subject`` by convex CCW polygon ``clip``."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        cx1, cy1 = clip[i]
        cx2, cy2 = clip[(i + 1) % n]
        ex, ey = cx2 - cx1, cy2 - cy1
        input_pts = output
        output = []
        prev = input_pts[-1]
        prev_in = ex * (prev[1] - cy1) - ey * (prev[0] - cx1) >= 0.0
        for cur in input_pts:
            cur_in = ex * (cur[1] - cy1) - ey * (cur[0] - cx1) >= 0.0
            if cur_in != prev_in:
                # edge crosses the clip line; add the intersection point
                dx, dy = cur[0] - prev[0], cur[1] - prev[1]
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ey * (prev[0] - cx1) - ex * (prev[1] - cy1)) / denom
                    output.append((prev[0] + t * dx, prev[1] + t * dy))
            if cur_in:
                output.append(cur)
            prev, prev_in = cur, cur_in
    return output


def convex_hull(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Monotone-chain convex hull, CCW. Handles collinear degeneracies."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return list(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: List[Tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: List[Tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _vertical_overlap(a: Box3D, b: Box3D) -> float:
    lo = max(a.z - a.h / 2.0, b.z - b.h / 2.0)
    hi = min(a.z + a.h / 2.0, b.z + b.h / 2.0)
    return max(0.0, hi - lo)


def _intersection_volume(a: Box3D, b: Box3D) -> float:
    dz = _vertical_overlap(a, b)
    if dz <= 0.0:
        return 0.0
    inter = clip_polygon(bev_corners(a), bev_corners(b))
    area = polygon_area(inter)
    if area <= _AREA_EPS:
        return 0.0
    return area * dz


def iou3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU of two oriented boxes. Degenerate overlap returns 0."""
    inter = _intersection_volume(a, b)
    if inter == 0.0:
        return 0.0
    union = a.volume() + b.volume() - inter
    return inter / union


def giou3d(a: Box3D, b: Box3D) -> float:
    """Generalized IoU in (-1, 1]; enclosure is the footprint hull times the
    joint vertical extent. Identical boxes give exactly 1, touching disjoint
    unit cubes give 0, unit cubes separated by their own width give -1/3.
    """
    inter = _intersection_volume(a, b)
    union = a.volume() + b.volume() - inter
    hull = convex_hull(bev_corners(a) + bev_corners(b))
    z_lo = min(a.z - a.h / 2.0, b.z - b.h / 2.0)
    z_hi = max(a.z + a.h / 2.0, b.z + b.h / 2.0)
    vol_hull = polygon_area(hull) * (z_hi - z_lo)
    iou = inter / union if inter > 0.0 else 0.0
    if vol_hull <= _AREA_EPS:
        return iou
    return iou - (vol_hull - union) / vol_hull


def nms(dets: Sequence[Detection], iou_thresh: float) -> List[Detection]:
    """Greedy non-maximum suppression on iou3d.

    Keeps detections in descending score order (ties broken by input order);
    a detection is suppressed when it overlaps an already kept one by more
    than ``iou_thresh``.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: List[Detection] = []
    for idx in order:
        cand = dets[idx]
        if all(iou3d(cand.box, k.box) <= iou_thresh for k in kept):
            kept.append(cand)
    return kept


def crop_box_for(
    box: Box3D,
    pose: AgentPose,
    cam: CameraModel,
    min_visible_corners: int = MIN_VISIBLE_CORNERS,
    min_crop_area: float = MIN_CROP_AREA,
) -> Optional[Bbox2D]:
    """Pixel envelope of a shared-frame box on one camera, or None.

    ``pose`` places the camera's agent in the shared frame; the camera
    extrinsics then take agent-frame points into the camera. Returns None
    when fewer than ``min_visible_corners`` corners are in front of the
    image plane or the clamped envelope is smaller than ``min_crop_area``
    square pixels.
    """
    to_cam = cam.extrinsics @ pose.inverse_matrix()
    us: List[float] = []
    vs: List[float] = []
    for corner in box_corners(box):
        p = transform_point(to_cam, corner)
        if p[2] <= DEPTH_EPS:
            continue
        u, v = project_to_pixel(cam, p)
        us.append(u)
        vs.append(v)
    if len(us) < min_visible_corners:
        return None
    u_min = max(0.0, min(us))
    v_min = max(0.0, min(vs))
    u_max = min(float(cam.width), max(us))
    v_max = min(float(cam.height), max(vs))
    if u_min >= u_max or v_min >= v_max:
        return None
    if (u_max - u_min) * (v_max - v_min) < min_crop_area:
        return None
    return Bbox2D(cam.agent_id, cam.camera_index, u_min, v_min, u_max, v_max)
