"""Command-line harness: simulate -> track -> evaluate, plus sweeps and a
fusion-kernel demo.

Exit codes are scriptable: 0 success, 1 usage, 2 data or validation error,
3 invariant violation. Every artifact embeds its full configuration in a
header line, so a run can be reproduced from its outputs alone. Output
paths are resolved against ``--out``/``--in`` or, for relative paths, the
``COTRACK_OUTPUT_ROOT`` environment variable when set.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import fileio, fusion, metrics
from .errors import (
    CotrackError,
    DataFormatError,
    DegenerateCovarianceError,
    SchemaVersionError,
    ShapeError,
    UndefinedMetricError,
    UnknownClassError,
    ValidationError,
)
from .geometry import transform_box
from .reid import DictProvider, FileBackedProvider, NullProvider
from .simulator import Scenario, canned_scenarios, generate
from .tracker import MultiObjectTracker, TrackerConfig, TrackerOutput
from .metrics import MotSample

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3
OUTPUT_ROOT_ENV = "COTRACK_OUTPUT_ROOT"

SWEEP_PARAMS = ("alpha", "iou_thresh", "beta")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _resolve(path: str) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def _apply_overrides(args) -> TrackerConfig:
    cfg = TrackerConfig()
    gap = cfg.stage_one_thresh - cfg.stage_two_thresh
    if args.baseline:
        cfg = replace(cfg, alpha=0.0, reid=replace(cfg.reid, enabled=False))
    if getattr(args, "no_vatm", False):
        cfg = replace(cfg, alpha=0.0)
    if getattr(args, "no_reid", False):
        cfg = replace(cfg, reid=replace(cfg.reid, enabled=False))
    if args.alpha is not None:
        cfg = replace(cfg, alpha=args.alpha)
    if args.iou_thresh is not None:
        cfg = replace(
            cfg,
            stage_one_thresh=args.iou_thresh,
            stage_two_thresh=args.iou_thresh - gap,
        )
    if args.beta is not None:
        cfg = replace(cfg, reid=replace(cfg.reid, ego_threshold=args.beta))
    if args.confidence_floor is not None:
        cfg = replace(cfg, confidence_floor=args.confidence_floor)
    return cfg


def _load_scenario(args) -> Scenario:
    if args.scenario_file:
        path = _resolve(args.scenario_file)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise DataFormatError(path, 0, "cannot open: %s" % exc)
        except json.JSONDecodeError as exc:
            raise DataFormatError(path, exc.lineno, "invalid JSON: %s" % exc.msg)
        try:
            scn = Scenario.from_dict(data)
        except (KeyError, TypeError) as exc:
            raise DataFormatError(path, 0, "bad scenario key: %s" % exc)
    else:
        scn = canned_scenarios()[args.scenario]
    if args.seed is not None:
        scn = replace(scn, seed=args.seed)
    return scn


def cmd_simulate(args) -> int:
    scn = _load_scenario(args)
    out_dir = _resolve(args.out or scn.name)
    os.makedirs(out_dir, exist_ok=True)
    bundles = generate(scn)
    config = {"command": "simulate", "scenario": scn.to_dict()}
    with open(
        os.path.join(out_dir, "scenario.json"), "w", encoding="utf-8", newline="\n"
    ) as fh:
        json.dump(scn.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    ego = scn.agents[0].agent_id
    fileio.write_frames(
        os.path.join(out_dir, "frames.jsonl"), bundles, config, ego_agent_id=ego
    )
    world_dets = []
    for bundle in bundles:
        for agent_id in sorted(bundle.detections):
            mat = bundle.poses[agent_id].as_matrix()
            for det in bundle.detections[agent_id]:
                world_dets.append(replace(det, box=transform_box(det.box, mat)))
    fileio.write_detections(
        os.path.join(out_dir, "detections.jsonl"), world_dets, config
    )
    truth = [(b.frame, g) for b in bundles for g in b.ground_truth]
    fileio.write_ground_truth(os.path.join(out_dir, "gt.jsonl"), truth, config)
    table = {}
    for bundle in bundles:
        table.update(bundle.embeddings)
    fileio.write_embeddings(os.path.join(out_dir, "embeddings.bin"), table, config)
    print(
        "simulated %s: %d frames, %d agents, %d objects -> %s"
        % (scn.name, scn.duration, len(scn.agents), len(scn.objects), out_dir)
    )
    return EXIT_OK


def _run_tracker(
    bundles, cfg: TrackerConfig, provider, ego_agent_id: str
) -> TrackerOutput:
    tracker = MultiObjectTracker(cfg, provider=provider, ego_agent_id=ego_agent_id)
    return tracker.run(bundles)


def cmd_track(args) -> int:
    in_dir = _resolve(args.in_dir)
    frames_path = os.path.join(in_dir, "frames.jsonl")
    header, bundles = fileio.read_frames(frames_path)
    ego = header.get("ego_agent") or (
        sorted(bundles[0].poses)[0] if bundles else "ego"
    )
    cfg = _apply_overrides(args)
    if args.embeddings:
        embeddings_path = _resolve(args.embeddings)
        if not os.path.exists(embeddings_path):
            raise DataFormatError(embeddings_path, 0, "embedding sidecar not found")
    else:
        embeddings_path = os.path.join(in_dir, "embeddings.bin")
    if cfg.reid.enabled and os.path.exists(embeddings_path):
        provider = FileBackedProvider(embeddings_path)
    else:
        provider = NullProvider()
    output = _run_tracker(bundles, cfg, provider, ego)
    out_dir = _resolve(args.out or args.in_dir)
    os.makedirs(out_dir, exist_ok=True)
    config = {
        "command": "track",
        "tracker": cfg.to_dict(),
        "source_config": header.get("config", {}),
    }
    fileio.write_tracks(
        os.path.join(out_dir, "tracks.jsonl"), output, config, ego_agent_id=ego
    )
    fileio.write_events(os.path.join(out_dir, "events.jsonl"), output, config)
    events = output.all_events()
    counts = {}
    for e in events:
        counts[e["event"]] = counts.get(e["event"], 0) + 1
    print(
        "tracked %d frames: %s"
        % (
            len(output.frames),
            ", ".join("%d %s" % (counts[k], k) for k in sorted(counts)) or "no events",
        )
    )
    return EXIT_OK


def _evaluate_class(
    gt: List[MotSample], preds: List[MotSample], overlap_floor: float
) -> Dict[str, object]:
    counts = metrics.evaluate_sequence(gt, preds, overlap_floor)
    row: Dict[str, object] = {
        "TP": counts.tp,
        "FP": counts.fp,
        "FN": counts.fn,
        "IDSW": counts.idsw,
        "GT": counts.gt,
        "MOTA": metrics.mota(counts),
        "MOTP": metrics.motp(counts) if counts.match_count else None,
    }
    try:
        fam = metrics.amota_family(gt, preds, overlap_floor)
        row.update(
            {"AMOTA": fam.amota, "sAMOTA": fam.samota, "AMOTP": fam.amotp}
        )
    except UndefinedMetricError as exc:
        row.update({"AMOTA": None, "sAMOTA": None, "AMOTP": None})
        row["warning"] = str(exc)
    return row


def cmd_evaluate(args) -> int:
    tracks_path = _resolve(args.tracks)
    gt_path = _resolve(args.gt)
    _, track_rows = fileio.read_tracks(tracks_path)
    _, gt_rows = fileio.read_ground_truth(gt_path)
    if not gt_rows:
        raise UndefinedMetricError("ground-truth file holds no objects")
    gt_frames = [f for f, _ in gt_rows]
    lo, hi = min(gt_frames), max(gt_frames)
    bad = [r.frame for r in track_rows if r.frame < lo or r.frame > hi]
    if bad:
        raise DataFormatError(
            tracks_path,
            0,
            "track frames %d..%d fall outside ground-truth range %d..%d"
            % (min(bad), max(bad), lo, hi),
        )
    classes = sorted({g.obj_class for _, g in gt_rows})
    per_class: Dict[str, Dict[str, object]] = {}
    warnings: List[str] = []
    for obj_class in classes:
        gt = [
            MotSample(f, g.object_id, g.box, 1.0)
            for f, g in gt_rows
            if g.obj_class == obj_class
        ]
        preds = [
            MotSample(r.frame, r.track_id, r.box, r.score)
            for r in track_rows
            if r.obj_class == obj_class
        ]
        row = _evaluate_class(gt, preds, args.overlap_floor)
        if "warning" in row:
            warnings.append("%s: %s" % (obj_class, row.pop("warning")))
        per_class[obj_class] = row
    averaged: Dict[str, object] = {}
    for key in ("MOTA", "MOTP", "AMOTA", "sAMOTA", "AMOTP"):
        vals = [r[key] for r in per_class.values() if r.get(key) is not None]
        averaged[key] = sum(vals) / len(vals) if vals else None
    for key in ("TP", "FP", "FN", "IDSW", "GT"):
        averaged[key] = sum(r[key] for r in per_class.values())
    report: Dict[str, object] = {
        "overlap_floor": args.overlap_floor,
        "per_class": per_class,
        "averaged": averaged,
        "warnings": warnings,
    }
    if args.detections:
        _, dets = fileio.read_detections(_resolve(args.detections))
        ap_block: Dict[str, object] = {"per_class": {}}
        for thresh in metrics.AP_IOU_THRESHOLDS:
            aps: Dict[str, float] = {}
            for obj_class in classes:
                cls_gt = [
                    MotSample(f, g.object_id, g.box, 1.0)
                    for f, g in gt_rows
                    if g.obj_class == obj_class
                ]
                cls_dets = [
                    MotSample(d.frame, i, d.box, d.score)
                    for i, d in enumerate(dets)
                    if d.obj_class == obj_class
                ]
                try:
                    ap, _ = metrics.average_precision(cls_dets, cls_gt, thresh)
                    aps[obj_class] = ap
                except UndefinedMetricError as exc:
                    warnings.append("AP@%.1f %s: %s" % (thresh, obj_class, exc))
            for obj_class, ap in aps.items():
                ap_block["per_class"].setdefault(obj_class, {})[
                    "AP@%.1f" % thresh
                ] = ap
            if aps:
                ap_block["mAP@%.1f" % thresh] = metrics.mean_average_precision(aps)
        report["detection"] = ap_block
    out_path = _resolve(args.out or os.path.join(os.path.dirname(tracks_path), "report.json"))
    config = {"command": "evaluate", "overlap_floor": args.overlap_floor}
    fileio.write_report(out_path, report, config)
    for obj_class in classes:
        row = per_class[obj_class]
        print(
            "%s: MOTA=%.4f IDSW=%d TP=%d FP=%d FN=%d"
            % (obj_class, row["MOTA"], row["IDSW"], row["TP"], row["FP"], row["FN"])
        )
    if averaged["MOTA"] is not None:
        print("averaged: MOTA=%.4f IDSW=%d" % (averaged["MOTA"], averaged["IDSW"]))
    print("report -> %s" % out_path)
    return EXIT_OK


def _sweep_values(args) -> List[float]:
    if args.values:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip() != ""]
        except ValueError:
            raise ValidationError("values", "must be a comma-separated float list")
    else:
        if args.step <= 0:
            raise ValidationError("step", "must be > 0")
        values = []
        v = args.start
        while v <= args.stop + 1e-9:
            values.append(round(v, 10))
            v += args.step
    if not values:
        raise ValidationError("values", "sweep range is empty")
    return values


def cmd_sweep(args) -> int:
    scn = _load_scenario(args)
    values = _sweep_values(args)
    bundles = generate(scn)
    table = {}
    for bundle in bundles:
        table.update(bundle.embeddings)
    gt = [
        (b.frame, g) for b in bundles for g in b.ground_truth
    ]
    classes = sorted({g.obj_class for _, g in gt})
    base = TrackerConfig()
    gap = base.stage_one_thresh - base.stage_two_thresh
    rows = []
    for value in values:
        if args.param == "alpha":
            cfg = replace(base, alpha=value)
        elif args.param == "iou_thresh":
            cfg = replace(
                base, stage_one_thresh=value, stage_two_thresh=value - gap
            )
        else:
            cfg = replace(base, reid=replace(base.reid, ego_threshold=value))
        provider = DictProvider(table) if cfg.reid.enabled else NullProvider()
        output = _run_tracker(bundles, cfg, provider, scn.agents[0].agent_id)
        samples = output.samples()
        for obj_class in classes:
            cls_gt = [
                MotSample(f, g.object_id, g.box, 1.0)
                for f, g in gt
                if g.obj_class == obj_class
            ]
            cls_pred = [
                MotSample(f, s.track_id, s.box, s.score)
                for f, s in samples
                if s.obj_class == obj_class
            ]
            counts = metrics.evaluate_sequence(cls_gt, cls_pred, args.overlap_floor)
            rows.append(
                {
                    "class": obj_class,
                    "value": float(value),
                    "mota": metrics.mota(counts),
                    "idsw": counts.idsw,
                }
            )
    out_path = _resolve(args.out or "%s_sweep_%s.csv" % (scn.name, args.param))
    config = {
        "command": "sweep",
        "param": args.param,
        "values": [float(v) for v in values],
        "scenario": scn.to_dict(),
    }
    fileio.write_sweep_csv(out_path, rows, ("class", "value", "mota", "idsw"), config)
    print("%d rows -> %s" % (len(rows), out_path))
    return EXIT_OK


def cmd_fuse_demo(args) -> int:
    try:
        sizes = tuple(int(s) for s in args.window_sizes.split(","))
    except ValueError:
        print("error: --window-sizes must be comma-separated integers", file=sys.stderr)
        return EXIT_USAGE
    for size in sizes:
        if size <= 0 or args.height % size or args.width % size:
            print(
                "error: grid %dx%d not divisible by window %d"
                % (args.height, args.width, size),
                file=sys.stderr,
            )
            return EXIT_USAGE
    cfg = fusion.make_config(
        channels=args.channels, window_sizes=sizes, seed=args.seed
    )
    rng = np.random.default_rng(args.seed + 1)
    agent_ids = ["agent%d" % i for i in range(args.agents)]
    maps = [
        fusion.FeatureMap(a, rng.normal(size=(args.height, args.width, args.channels)))
        for a in agent_ids
    ]
    ego = agent_ids[0]
    checks: List[str] = []
    failed = False

    t0 = time.perf_counter()
    attended = []
    worst_rows = 0.0
    for m in maps:
        out, trace = fusion.multiscale_attention(m, cfg)
        attended.append(out)
        worst_rows = max(worst_rows, trace.max_row_error())
    fused, fuse_trace = fusion.interagent_fuse(attended, ego, cfg)
    worst_rows = max(worst_rows, fuse_trace.max_row_error())
    ok = worst_rows < 1e-9
    failed |= not ok
    checks.append(
        "softmax rows sum to 1 (max err %.2e): %s" % (worst_rows, "pass" if ok else "FAIL")
    )

    stack = np.stack([m.data for m in attended])
    hull_err = max(
        float((fused.data - stack.max(axis=0)).max(initial=0.0)),
        float((stack.min(axis=0) - fused.data).max(initial=0.0)),
    )
    ok = hull_err < 1e-9
    failed |= not ok
    checks.append(
        "fusion stays in per-agent convex bounds (max excess %.2e): %s"
        % (hull_err, "pass" if ok else "FAIL")
    )

    result = fusion.gsaf_forward(maps, ego, cfg)
    fast_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    oracle = fusion.naive_forward(maps, ego, cfg)
    naive_time = time.perf_counter() - t0
    diff = float(np.abs(result.data - oracle.data).max())
    ok = diff < 1e-5
    failed |= not ok
    checks.append("matches looped reference (max |diff| %.2e): %s" % (diff, "pass" if ok else "FAIL"))

    if args.agents == 1:
        solo, _ = fusion.interagent_fuse([attended[0]], ego, cfg)
        ident = float(np.abs(solo.data - attended[0].data).max())
        ok = ident < 1e-12
        failed |= not ok
        checks.append(
            "identity-fusion check (single agent, max |diff| %.2e): %s"
            % (ident, "passed" if ok else "FAIL")
        )

    for line in checks:
        print(line)
    print(
        "grid %dx%dx%d, %d agents: fused in %.1f ms (reference %.1f ms)"
        % (
            args.height,
            args.width,
            args.channels,
            args.agents,
            fast_time * 1e3,
            naive_time * 1e3,
        )
    )
    return EXIT_INVARIANT if failed else EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="cotrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a deterministic scenario")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=sorted(canned_scenarios()))
    src.add_argument("--scenario-file", help="scenario JSON file")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default=None, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    trk = sub.add_parser("track", help="run the tracker over simulated frames")
    trk.add_argument("--in", dest="in_dir", required=True, help="simulate output dir")
    trk.add_argument("--out", default=None, help="output directory (default: --in)")
    trk.add_argument("--embeddings", default=None, help="embedding sidecar file")
    trk.add_argument("--baseline", action="store_true", help="alpha=0 and no re-identification")
    trk.add_argument("--no-reid", action="store_true")
    trk.add_argument("--no-vatm", action="store_true")
    trk.add_argument("--alpha", type=float, default=None)
    trk.add_argument("--iou-thresh", type=float, default=None,
                     help="first-stage affinity threshold (second stage shifts with it)")
    trk.add_argument("--beta", type=float, default=None, help="re-id similarity threshold")
    trk.add_argument("--confidence-floor", type=float, default=None)
    trk.set_defaults(func=cmd_track)

    ev = sub.add_parser("evaluate", help="score a track file against ground truth")
    ev.add_argument("--tracks", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--detections", default=None, help="detection file for AP/mAP")
    ev.add_argument("--out", default=None, help="report path (default: report.json)")
    ev.add_argument("--overlap-floor", type=float, default=metrics.DEFAULT_OVERLAP_FLOOR)
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", help="metric-vs-parameter grid on one scenario")
    ssrc = sw.add_mutually_exclusive_group(required=True)
    ssrc.add_argument("--scenario", choices=sorted(canned_scenarios()))
    ssrc.add_argument("--scenario-file")
    sw.add_argument("--seed", type=int, default=None)
    sw.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    sw.add_argument("--values", default=None, help="comma-separated values")
    sw.add_argument("--start", type=float, default=0.0)
    sw.add_argument("--stop", type=float, default=2.0)
    sw.add_argument("--step", type=float, default=0.25)
    sw.add_argument("--overlap-floor", type=float, default=metrics.DEFAULT_OVERLAP_FLOOR)
    sw.add_argument("--out", default=None)
    sw.set_defaults(func=cmd_sweep)

    fd = sub.add_parser("fuse-demo", help="numeric checks of the fusion kernel")
    fd.add_argument("--agents", type=int, default=3)
    fd.add_argument("--height", type=int, default=8)
    fd.add_argument("--width", type=int, default=8)
    fd.add_argument("--channels", type=int, default=8)
    fd.add_argument("--window-sizes", default="2,4")
    fd.add_argument("--seed", type=int, default=0)
    fd.set_defaults(func=cmd_fuse_demo)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        DataFormatError,
        SchemaVersionError,
        ValidationError,
        UnknownClassError,
        UndefinedMetricError,
    ) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except (ShapeError, DegenerateCovarianceError) as exc:
        print("invariant violation: %s" % exc, file=sys.stderr)
        return EXIT_INVARIANT
    except CotrackError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())
