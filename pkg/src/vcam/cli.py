"""Command-line interface: trajectory presets, planning, execution, metrics,
the scale sweep, plan validation, and the HTTP service."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .backends import HttpBackend, OracleBackend
from .executor import execute, sweep_scale
from .formats import (
    FormatError,
    TrajectoryFile,
    load_frame_dir,
    load_json,
    plan_from_dict,
    plan_to_dict,
    prepare_request,
    save_frame_png,
    save_json,
    trajectory_from_dict,
    trajectory_to_dict,
)
from .geometry import Intrinsics
from .metrics import evaluate_frames
from .oracle import build_scene, frame_hash, oracle_matches
from .planner import PlannerConfig, make_plan, validate_plan
from .trajectory import TrajectorySpec, generate

logger = logging.getLogger("vcam")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("VCAM_LOG", "error").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _error_exit(exc: BaseException) -> int:
    line = json.dumps({"error": type(exc).__name__, "detail": str(exc)})
    print(line, file=sys.stderr)
    return 1


def _parse_vec3(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise FormatError(f"expected 'x,y,z', got {text!r}")
    return tuple(parts)


def _intrinsics_from_args(args) -> Intrinsics:
    fx = args.fx if args.fx is not None else float(args.width)
    fy = args.fy if args.fy is not None else fx
    cx = args.cx if args.cx is not None else args.width / 2.0
    cy = args.cy if args.cy is not None else args.height / 2.0
    return Intrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=args.width, height=args.height)


def _backend_from_arg(value: str, scene_seed: int):
    if value == "oracle":
        return OracleBackend(build_scene(scene_seed))
    if value.startswith("http"):
        url = value[len("http:"):] if value.startswith("http:") and "://" not in value else value
        if "://" not in url:
            raise FormatError(f"backend url {value!r} needs a scheme, e.g. http://host:port")
        return HttpBackend(url)
    raise FormatError(f"unknown backend {value!r} (expected 'oracle' or 'http:<url>')")


def _add_planner_flags(p: argparse.ArgumentParser):
    p.add_argument("--context", "-T", type=int, default=21, dest="context",
                   help="context window size (frames per pass)")
    p.add_argument("--strategy", default="auto",
                   choices=["auto", "one_pass", "nearest", "gt_nearest", "interp", "gt_interp"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cfg", type=float, default=3.0, help="CFG scale in [1, 10]")
    p.add_argument("--task", default="trajectory", choices=["trajectory", "set"])
    p.add_argument("--anchors-per-pass", type=int, default=None)
    p.add_argument("--retrieval-count", type=int, default=None)
    p.add_argument("--retrieval-mode", default="spatial", choices=["spatial", "temporal"])
    ext = p.add_mutually_exclusive_group()
    ext.add_argument("--allow-extension", dest="allow_extension", action="store_true",
                     default=None)
    ext.add_argument("--no-extension", dest="allow_extension", action="store_false")


def _config_from_args(args) -> PlannerConfig:
    return PlannerConfig(context_window=args.context, strategy=args.strategy,
                         cfg_scale=args.cfg, seed=args.seed,
                         anchors_per_pass=args.anchors_per_pass,
                         retrieval_count=args.retrieval_count,
                         allow_extension=args.allow_extension,
                         retrieval_mode=args.retrieval_mode)


def cmd_preset(args) -> int:
    params = {"frame_count": args.n}
    if args.center:
        params["center"] = _parse_vec3(args.center)
    if args.radius is not None:
        params["radius"] = args.radius
    if args.elevation is not None:
        params["elevation"] = args.elevation
    if args.sweep_angle is not None:
        params["sweep"] = args.sweep_angle
    if args.open_path:
        params["closed"] = False
    if args.focal_scale is not None:
        params["focal_scale"] = args.focal_scale
    if args.dist_start is not None:
        params["distance_start"] = args.dist_start
    if args.dist_end is not None:
        params["distance_end"] = args.dist_end
    spec = TrajectorySpec(kind=args.kind, base_intrinsics=_intrinsics_from_args(args),
                          parameters=params)
    cameras = generate(spec)
    k = min(max(args.input_count, 1), len(cameras))
    roles = ["input"] * k + ["target"] * (len(cameras) - k)
    traj = TrajectoryFile(cameras=tuple(cameras), roles=tuple(roles))
    save_json(trajectory_to_dict(traj), args.out)
    print(f"wrote {args.out} ({len(cameras)} frames, {k} input)")
    return 0


def _load_trajectory(path) -> TrajectoryFile:
    return trajectory_from_dict(load_json(path))


def cmd_plan(args) -> int:
    traj = _load_trajectory(args.trajectory)
    request = prepare_request(traj, task=args.task, normalize=not args.no_normalize,
                              unit_length=args.unit_length)
    anchors = None
    if args.anchor_trajectory:
        anchors = list(_load_trajectory(args.anchor_trajectory).cameras)
    plan = make_plan(request, _config_from_args(args), anchor_cameras=anchors)
    save_json(plan_to_dict(plan), args.out)
    print(f"wrote {args.out} ({len(plan.passes)} passes, "
          f"{len(plan.anchor_cameras)} anchors)")
    return 0


def cmd_run(args) -> int:
    plan = plan_from_dict(load_json(args.plan))
    backend = _backend_from_arg(args.backend, args.scene_seed)
    input_frames = None
    if args.inputs:
        input_frames = load_frame_dir(args.inputs, prefix="input_")
    result = execute(plan, backend, input_frames=input_frames, workers=args.workers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in sorted(result.frames):
        save_frame_png(result.frames[k], out / f"frame_{k:05d}.png")
    standalone = [j for j, t in enumerate(plan.anchor_target_indices) if t is None]
    for j in standalone:
        save_frame_png(result.anchor_frames[j], out / f"anchor_{j:05d}.png")

    # Run log is deterministic on purpose (no wall times): frame hashes and
    # conditioning fingerprints only.
    log = {
        "plan_digest": hashlib.blake2b(
            json.dumps(plan_to_dict(plan), sort_keys=True).encode(),
            digest_size=16).hexdigest(),
        "passes": [{"id": entry.pass_id,
                    "conditioning_fingerprints": entry.conditioning_fingerprints}
                   for entry in sorted(result.per_pass_log, key=lambda e: e.pass_id)],
        "frames": {str(k): frame_hash(result.frames[k]) for k in sorted(result.frames)},
        "anchors": {str(j): frame_hash(result.anchor_frames[j])
                    for j in sorted(result.anchor_frames)},
    }
    save_json(log, out / "run_log.json")
    print(f"wrote {len(result.frames)} frames to {out}")
    return 0


def cmd_eval(args) -> int:
    preds = load_frame_dir(args.pred)
    refs = load_frame_dir(args.ref)
    if len(preds) != len(refs):
        raise FormatError(f"prediction/reference count mismatch: {len(preds)} vs {len(refs)}")
    cameras = None
    correspondences = None
    if args.trajectory:
        traj = _load_trajectory(args.trajectory)
        targets = traj.target_cameras
        if len(targets) == len(preds) and args.scene_seed is not None and len(preds) >= 2:
            scene = build_scene(args.scene_seed)
            cameras = targets
            correspondences = [oracle_matches(scene, a, b)
                               for a, b in zip(targets, targets[1:])]
    report = evaluate_frames(preds, refs, cameras=cameras, correspondences=correspondences)
    from .report import write_report

    written = write_report(report, args.out)
    for name, value in sorted(report.means.items()):
        print(f"{name}: {value:.4f}")
    print(f"wrote {len(written)} report files to {args.out}")
    return 0


def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        lo, hi, n = text.split(":")
        return [float(u) for u in np.linspace(float(lo), float(hi), int(n))]
    return [float(p) for p in text.split(",")]


def cmd_sweep_scale(args) -> int:
    traj = _load_trajectory(args.trajectory)
    request = traj.to_request(task=args.task)
    refs = load_frame_dir(args.refs)
    grid = _parse_grid(args.grid) if args.grid else None
    backend = _backend_from_arg(args.backend, args.scene_seed)
    best, scores = sweep_scale(request, _config_from_args(args), backend, refs, grid=grid)
    from .report import write_sweep_report

    write_sweep_report(scores, best, args.out)
    print(f"best unit length: {best}")
    return 0


def cmd_validate(args) -> int:
    plan = plan_from_dict(load_json(args.plan))
    violations = validate_plan(plan)
    for v in violations:
        print(v)
    if violations:
        print(json.dumps({"error": "InvalidPlan",
                          "detail": f"{len(violations)} violations"}), file=sys.stderr)
        return 1
    print("plan is valid")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    serve(port=args.port, scene_seed=args.scene_seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vcam",
                                     description="virtual-camera planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="generate a trajectory preset")
    p.add_argument("kind", choices=["orbit", "spiral", "pan", "zoom_in", "zoom_out",
                                    "dolly_zoom"])
    p.add_argument("--n", type=int, default=21, help="frame count")
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--center", default=None, help="x,y,z")
    p.add_argument("--elevation", type=float, default=None, help="radians")
    p.add_argument("--sweep", type=float, default=None, dest="sweep_angle",
                   help="orbit sweep angle in radians (default full circle)")
    p.add_argument("--open", dest="open_path", action="store_true",
                   help="open (non-looping) orbit")
    p.add_argument("--focal-scale", type=float, default=None)
    p.add_argument("--dist-start", type=float, default=None)
    p.add_argument("--dist-end", type=float, default=None)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--fx", type=float, default=None)
    p.add_argument("--fy", type=float, default=None)
    p.add_argument("--cx", type=float, default=None)
    p.add_argument("--cy", type=float, default=None)
    p.add_argument("--input-count", type=int, default=1)
    p.add_argument("--out", default="trajectory.json")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("plan", help="plan sampling passes for a trajectory")
    p.add_argument("trajectory")
    _add_planner_flags(p)
    p.add_argument("--unit-length", type=float, default=2.0,
                   help="scene-normalization cube half-side")
    p.add_argument("--no-normalize", action="store_true",
                   help="plan on the raw cameras without normalization")
    p.add_argument("--anchor-trajectory", default=None,
                   help="trajectory file supplying explicit anchor cameras")
    p.add_argument("--out", default="plan.json")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="execute a plan against a backend")
    p.add_argument("plan")
    p.add_argument("--backend", default="oracle", help="oracle or http:<url>")
    p.add_argument("--scene-seed", type=int, default=0)
    p.add_argument("--inputs", default=None,
                   help="directory of input_%%05d.png frames (default: oracle ground truth)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="frames")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--traj", dest="trajectory", default=None,
                   help="trajectory file (enables TSED with --scene-seed)")
    p.add_argument("--scene-seed", type=int, default=None)
    p.add_argument("--out", default="report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-scale", help="grid-search the normalization unit length")
    p.add_argument("trajectory")
    _add_planner_flags(p)
    p.add_argument("--refs", required=True, help="reference frame directory")
    p.add_argument("--backend", default="oracle")
    p.add_argument("--scene-seed", type=int, default=0)
    p.add_argument("--grid", default=None, help="lo:hi:count or comma list")
    p.add_argument("--out", default="sweep")
    p.set_defaults(func=cmd_sweep_scale)

    p = sub.add_parser("validate", help="check a plan file's invariants")
    p.add_argument("plan")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the HTTP planning/preview service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--scene-seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        logger.debug("command failed", exc_info=True)
        return _error_exit(exc)


if __name__ == "__main__":
    sys.exit(main())
