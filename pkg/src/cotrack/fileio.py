"""File formats: line-delimited records, binary embeddings, reports.

Text artifacts are UTF-8 JSON-object-per-line files whose first line is a
header carrying the schema tag, the tool version, and the full run
configuration, so any output can be reproduced from its own header. All
JSON is serialized canonically (sorted keys, fixed separators, no NaN), so
parse -> serialize round-trips are bit-exact and reruns are comparable
byte-for-byte.

Embeddings live in a binary sidecar: one JSON header line (dimension,
count, ordered keys, dtype) followed by little-endian float32 rows in key
order. Detection/track text rows reference rows by key, which keeps the
text files small.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import (
    AgentPose,
    Box3D,
    CameraModel,
    Detection,
    FrameBundle,
    GroundTruthObject,
)
from .errors import DataFormatError, SchemaVersionError, ValidationError
from .tracker import FrameOutput, TrackSnapshot, TrackerOutput

TOOL_VERSION = "cotrack 0.1.0"
FRAMES_SCHEMA = "cotrack/frames.v1"
DETECTIONS_SCHEMA = "cotrack/detections.v1"
GROUND_TRUTH_SCHEMA = "cotrack/ground-truth.v1"
TRACKS_SCHEMA = "cotrack/tracks.v1"
EVENTS_SCHEMA = "cotrack/events.v1"
EMBEDDINGS_SCHEMA = "cotrack/embeddings.v1"
REPORT_SCHEMA = "cotrack/report.v1"


def canonical_json(obj) -> str:
    """Deterministic single-line JSON."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _write_lines(path, lines: Iterable[str]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _header(schema: str, config: Optional[dict]) -> dict:
    return {"schema": schema, "tool": TOOL_VERSION, "config": config or {}}


def _read_jsonl(path, expected_schema: str) -> Tuple[dict, List[dict]]:
    rows: List[dict] = []
    header: Optional[dict] = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(str(path), 0, "cannot open: %s" % exc)
    with fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(str(path), line_no, "invalid JSON: %s" % exc.msg)
            if line_no == 1:
                header = obj
                if header.get("schema") != expected_schema:
                    raise SchemaVersionError(
                        "%s: expected schema %r, found %r"
                        % (path, expected_schema, header.get("schema"))
                    )
                continue
            rows.append(obj)
    if header is None:
        raise DataFormatError(str(path), 0, "empty file, header line missing")
    return header, rows


def box_fields(box: Box3D) -> dict:
    return {
        "x": float(box.x),
        "y": float(box.y),
        "z": float(box.z),
        "w": float(box.w),
        "l": float(box.l),
        "h": float(box.h),
        "yaw": float(box.yaw),
    }


def box_from_fields(row: Mapping, path: str, line_no: int) -> Box3D:
    try:
        return Box3D(
            row["x"], row["y"], row["z"], row["w"], row["l"], row["h"], row["yaw"]
        )
    except (KeyError, ValidationError) as exc:
        raise DataFormatError(path, line_no, "bad box: %s" % exc)


def pose_to_dict(pose: AgentPose) -> dict:
    return {
        "rotation": [[float(v) for v in row] for row in pose.rotation],
        "translation": [float(v) for v in pose.translation],
    }


def pose_from_dict(data: Mapping) -> AgentPose:
    return AgentPose(np.array(data["rotation"]), np.array(data["translation"]))


def camera_to_dict(cam: CameraModel) -> dict:
    return {
        "agent_id": cam.agent_id,
        "camera_index": cam.camera_index,
        "intrinsics": [[float(v) for v in row] for row in cam.intrinsics],
        "extrinsics": [[float(v) for v in row] for row in cam.extrinsics],
        "width": cam.width,
        "height": cam.height,
    }


def camera_from_dict(data: Mapping) -> CameraModel:
    return CameraModel(
        agent_id=data["agent_id"],
        camera_index=data["camera_index"],
        intrinsics=np.array(data["intrinsics"]),
        extrinsics=np.array(data["extrinsics"]),
        width=data["width"],
        height=data["height"],
    )


def detection_row(det: Detection) -> dict:
    row = {
        "frame": det.frame,
        "agent_id": det.agent_id,
        "class": det.obj_class,
        "score": float(det.score),
    }
    row.update(box_fields(det.box))
    if det.embedding_ref is not None:
        row["embedding_ref"] = det.embedding_ref
    return row


def detection_from_row(row: Mapping, path: str, line_no: int) -> Detection:
    try:
        return Detection(
            frame=row["frame"],
            agent_id=row["agent_id"],
            obj_class=row["class"],
            box=box_from_fields(row, path, line_no),
            score=row["score"],
            embedding_ref=row.get("embedding_ref"),
        )
    except (KeyError, TypeError, ValidationError) as exc:
        raise DataFormatError(path, line_no, "bad detection: %s" % exc)


# -- FrameBundle stream ---------------------------------------------------


def write_frames(
    path,
    bundles: Sequence[FrameBundle],
    config: Optional[dict] = None,
    ego_agent_id: Optional[str] = None,
) -> None:
    """Full bundle stream: header carries the camera rigs and ego agent."""
    rigs: Dict[str, List[dict]] = {}
    if bundles:
        rigs = {
            agent: [camera_to_dict(c) for c in cams]
            for agent, cams in sorted(bundles[0].cameras.items())
        }
    header = _header(FRAMES_SCHEMA, config)
    header["ego_agent"] = ego_agent_id
    header["rigs"] = rigs
    lines = [canonical_json(header)]
    for bundle in bundles:
        row = {
            "frame": bundle.frame,
            "timestamp": float(bundle.timestamp),
            "poses": {
                agent: pose_to_dict(pose)
                for agent, pose in sorted(bundle.poses.items())
            },
            "detections": {
                agent: [detection_row(d) for d in dets]
                for agent, dets in sorted(bundle.detections.items())
            },
            "ground_truth": [
                dict(
                    object_id=g.object_id,
                    **{"class": g.obj_class},
                    **box_fields(g.box),
                )
                for g in bundle.ground_truth
            ],
        }
        lines.append(canonical_json(row))
    _write_lines(path, lines)


def read_frames(path) -> Tuple[dict, List[FrameBundle]]:
    """Rebuild the bundle stream; embeddings ride separately (see sidecar)."""
    header, rows = _read_jsonl(path, FRAMES_SCHEMA)
    rigs = {
        agent: [camera_from_dict(c) for c in cams]
        for agent, cams in header.get("rigs", {}).items()
    }
    bundles: List[FrameBundle] = []
    prev_frame = None
    for line_no, row in enumerate(rows, start=2):
        frame = row.get("frame")
        if prev_frame is not None and frame <= prev_frame:
            raise DataFormatError(str(path), line_no, "frames must increase")
        prev_frame = frame
        poses = {a: pose_from_dict(p) for a, p in row.get("poses", {}).items()}
        detections = {
            a: [detection_from_row(d, str(path), line_no) for d in dets]
            for a, dets in row.get("detections", {}).items()
        }
        truth = [
            GroundTruthObject(
                g["object_id"], g["class"], box_from_fields(g, str(path), line_no)
            )
            for g in row.get("ground_truth", [])
        ]
        bundles.append(
            FrameBundle(
                frame=frame,
                timestamp=row.get("timestamp", 0.0),
                detections=detections,
                poses=poses,
                cameras=rigs,
                ground_truth=truth,
                embeddings={},
            )
        )
    return header, bundles


# -- flat detection / ground-truth files -----------------------------------


def write_detections(
    path, dets: Sequence[Detection], config: Optional[dict] = None
) -> None:
    ordered = sorted(
        range(len(dets)), key=lambda i: (dets[i].frame, dets[i].agent_id, i)
    )
    lines = [canonical_json(_header(DETECTIONS_SCHEMA, config))]
    lines.extend(canonical_json(detection_row(dets[i])) for i in ordered)
    _write_lines(path, lines)


def read_detections(path) -> Tuple[dict, List[Detection]]:
    header, rows = _read_jsonl(path, DETECTIONS_SCHEMA)
    dets: List[Detection] = []
    prev = None
    for line_no, row in enumerate(rows, start=2):
        det = detection_from_row(row, str(path), line_no)
        if prev is not None and det.frame < prev:
            raise DataFormatError(str(path), line_no, "frames must be non-decreasing")
        prev = det.frame
        dets.append(det)
    return header, dets


def write_ground_truth(
    path,
    per_frame: Sequence[Tuple[int, GroundTruthObject]],
    config: Optional[dict] = None,
) -> None:
    lines = [canonical_json(_header(GROUND_TRUTH_SCHEMA, config))]
    for frame, obj in per_frame:
        row = {"frame": frame, "object_id": obj.object_id, "class": obj.obj_class}
        row.update(box_fields(obj.box))
        lines.append(canonical_json(row))
    _write_lines(path, lines)


def read_ground_truth(path) -> Tuple[dict, List[Tuple[int, GroundTruthObject]]]:
    header, rows = _read_jsonl(path, GROUND_TRUTH_SCHEMA)
    out: List[Tuple[int, GroundTruthObject]] = []
    prev = None
    for line_no, row in enumerate(rows, start=2):
        try:
            frame = row["frame"]
            obj = GroundTruthObject(
                row["object_id"], row["class"], box_from_fields(row, str(path), line_no)
            )
        except KeyError as exc:
            raise DataFormatError(str(path), line_no, "missing field %s" % exc)
        if prev is not None and frame < prev:
            raise DataFormatError(str(path), line_no, "frames must be non-decreasing")
        prev = frame
        out.append((frame, obj))
    return header, out


# -- track file + event log ------------------------------------------------


def track_row(
    frame: int, snap: TrackSnapshot, agent_id: str, events: Sequence[str]
) -> dict:
    row = {
        "frame": frame,
        "agent_id": agent_id,
        "class": snap.obj_class,
        "score": float(snap.score),
        "track_id": snap.track_id,
        "speed": float(snap.speed),
        "events": list(events),
    }
    row.update(box_fields(snap.box))
    return row


@dataclass(frozen=True)
class TrackRow:
    """One parsed track-file record."""

    frame: int
    track_id: int
    obj_class: str
    box: Box3D
    score: float
    speed: float
    events: Tuple[str, ...]


def write_tracks(
    path,
    output: TrackerOutput,
    config: Optional[dict] = None,
    ego_agent_id: str = "ego",
) -> None:
    lines = [canonical_json(_header(TRACKS_SCHEMA, config))]
    for fr in output.frames:
        noted = {}
        for event in fr.events:
            noted.setdefault(event["track_id"], []).append(event["event"])
        for snap in fr.tracks:
            lines.append(
                canonical_json(
                    track_row(
                        fr.frame, snap, ego_agent_id, noted.get(snap.track_id, [])
                    )
                )
            )
    _write_lines(path, lines)


def read_tracks(path) -> Tuple[dict, List[TrackRow]]:
    header, rows = _read_jsonl(path, TRACKS_SCHEMA)
    out: List[TrackRow] = []
    prev = None
    for line_no, row in enumerate(rows, start=2):
        try:
            rec = TrackRow(
                frame=row["frame"],
                track_id=row["track_id"],
                obj_class=row["class"],
                box=box_from_fields(row, str(path), line_no),
                score=row["score"],
                speed=row.get("speed", 0.0),
                events=tuple(row.get("events", [])),
            )
        except KeyError as exc:
            raise DataFormatError(str(path), line_no, "missing field %s" % exc)
        if prev is not None and rec.frame < prev:
            raise DataFormatError(str(path), line_no, "frames must be non-decreasing")
        prev = rec.frame
        out.append(rec)
    return header, out


def write_events(
    path, output: TrackerOutput, config: Optional[dict] = None
) -> None:
    lines = [canonical_json(_header(EVENTS_SCHEMA, config))]
    lines.extend(canonical_json(e) for e in output.all_events())
    _write_lines(path, lines)


def read_events(path) -> Tuple[dict, List[dict]]:
    return _read_jsonl(path, EVENTS_SCHEMA)


# -- embedding sidecar ------------------------------------------------------


def write_embeddings(
    path, table: Mapping[str, np.ndarray], config: Optional[dict] = None
) -> None:
    """JSON header line + float32 little-endian rows in sorted key order."""
    keys = sorted(table)
    dim = 0
    for key in keys:
        vec = np.asarray(table[key])
        if vec.ndim != 1:
            raise ValidationError("embeddings", "row %r is not a vector" % key)
        if dim == 0:
            dim = vec.size
        elif vec.size != dim:
            raise ValidationError("embeddings", "row %r has mixed dimension" % key)
    header = _header(EMBEDDINGS_SCHEMA, config)
    header.update({"dim": dim, "count": len(keys), "keys": keys, "dtype": "<f4",
                   "normalized": True})
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(canonical_json(header).encode("utf-8"))
        fh.write(b"\n")
        for key in keys:
            fh.write(np.ascontiguousarray(table[key], dtype="<f4").tobytes())


def read_embeddings(path) -> Dict[str, np.ndarray]:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise DataFormatError(str(path), 0, "cannot open: %s" % exc)
    with fh:
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise DataFormatError(str(path), 1, "invalid header: %s" % exc)
        if header.get("schema") != EMBEDDINGS_SCHEMA:
            raise SchemaVersionError(
                "%s: expected schema %r, found %r"
                % (path, EMBEDDINGS_SCHEMA, header.get("schema"))
            )
        dim = int(header["dim"])
        keys = header["keys"]
        table: Dict[str, np.ndarray] = {}
        for i, key in enumerate(keys):
            raw = fh.read(dim * 4)
            if len(raw) != dim * 4:
                raise DataFormatError(str(path), 1, "truncated at row %d" % i)
            table[key] = np.frombuffer(raw, dtype="<f4").astype(float)
    return table


# -- report + sweep ---------------------------------------------------------


def write_report(path, report: dict, config: Optional[dict] = None) -> None:
    payload = _header(REPORT_SCHEMA, config)
    payload.update(report)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def read_report(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataFormatError(str(path), 0, "cannot open: %s" % exc)
    except json.JSONDecodeError as exc:
        raise DataFormatError(str(path), exc.lineno, "invalid JSON: %s" % exc.msg)
    if payload.get("schema") != REPORT_SCHEMA:
        raise SchemaVersionError(
            "%s: expected schema %r, found %r"
            % (path, REPORT_SCHEMA, payload.get("schema"))
        )
    return payload


def write_sweep_csv(
    path,
    rows: Sequence[Mapping],
    columns: Sequence[str],
    config: Optional[dict] = None,
) -> None:
    """CSV with '#'-prefixed header lines carrying the config echo."""
    lines = [
        "# " + canonical_json(_header("cotrack/sweep.v1", config)),
        ",".join(columns),
    ]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in columns))
    _write_lines(path, lines)


def _csv_cell(value) -> str:
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValidationError("sweep", "non-finite cell value")
        return repr(value)
    return str(value)
