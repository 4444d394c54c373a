"""On-disk and wire formats: trajectory files, plan files, scene manifests,
metric reports, and PNG frame IO. All formats are JSON and round-trip
losslessly (floats serialize via repr)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Camera, Intrinsics, Pose
from .metrics import MetricReport
from .oracle import Frame
from .planner import (
    ForwardPass,
    FrameRef,
    PlannerConfig,
    SamplingPlan,
    ViewRequest,
)

TRAJECTORY_CONVENTION = "camera_to_world;x_right;y_down;z_forward;row_major"
TRAJECTORY_VERSION = 1
PLAN_VERSION = 1


class FormatError(ValueError):
    """Raised for malformed files or dictionaries."""


def _require(body: dict, key: str, context: str):
    if key not in body:
        raise FormatError(f"{context}: missing field {key!r}")
    return body[key]


def intrinsics_to_dict(intr: Intrinsics) -> dict:
    return {"fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
            "width": intr.width, "height": intr.height}


def intrinsics_from_dict(body: dict) -> Intrinsics:
    try:
        return Intrinsics(fx=float(body["fx"]), fy=float(body["fy"]),
                          cx=float(body["cx"]), cy=float(body["cy"]),
                          width=int(body["width"]), height=int(body["height"]))
    except KeyError as exc:
        raise FormatError(f"intrinsics: missing field {exc.args[0]!r}") from exc


def camera_to_dict(camera: Camera) -> dict:
    return {"pose": [float(v) for v in camera.pose.matrix().reshape(-1)],
            "intrinsics": intrinsics_to_dict(camera.intrinsics)}


def camera_from_dict(body: dict) -> Camera:
    pose_values = _require(body, "pose", "camera")
    if len(pose_values) != 16:
        raise FormatError("camera: pose must hold 16 values (4x4 row-major)")
    m = np.array(pose_values, dtype=np.float64).reshape(4, 4)
    if np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-12:
        raise FormatError("camera: pose bottom row must be (0, 0, 0, 1)")
    return Camera(pose=Pose.from_matrix(m),
                  intrinsics=intrinsics_from_dict(_require(body, "intrinsics", "camera")))


@dataclass(frozen=True)
class TrajectoryFile:
    """Ordered posed frames with input/target roles."""

    cameras: tuple[Camera, ...]
    roles: tuple[str, ...]
    version: int = TRAJECTORY_VERSION
    convention: str = TRAJECTORY_CONVENTION

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "roles", tuple(self.roles))
        if len(self.cameras) != len(self.roles):
            raise FormatError("trajectory: role per frame required")
        if any(r not in ("input", "target") for r in self.roles):
            raise FormatError("trajectory: roles must be 'input' or 'target'")
        if "input" not in self.roles:
            raise FormatError("trajectory: needs at least one input frame")
        if self.convention != TRAJECTORY_CONVENTION:
            raise FormatError(f"trajectory: unsupported convention {self.convention!r}")

    @property
    def input_cameras(self) -> list[Camera]:
        return [c for c, r in zip(self.cameras, self.roles) if r == "input"]

    @property
    def target_cameras(self) -> list[Camera]:
        return [c for c, r in zip(self.cameras, self.roles) if r == "target"]

    def to_request(self, task: str = "trajectory") -> ViewRequest:
        return ViewRequest(tuple(self.input_cameras), tuple(self.target_cameras),
                           task=task, ordered_targets=task == "trajectory")


def prepare_request(traj: TrajectoryFile, task: str = "trajectory",
                    normalize: bool = True, unit_length: float = 2.0) -> ViewRequest:
    """Shared CLI/HTTP planning path: optionally re-express the trajectory
    relative to its first input and normalize the scene scale, then split
    into a view request."""
    from .geometry import normalize_scene, relative_to_first

    cameras = list(traj.cameras)
    if normalize:
        cameras = relative_to_first(cameras, traj.roles.index("input"))
        cameras, _ = normalize_scene(cameras, unit_length=unit_length)
    prepared = TrajectoryFile(cameras=tuple(cameras), roles=traj.roles)
    return prepared.to_request(task=task)


def trajectory_to_dict(traj: TrajectoryFile) -> dict:
    return {"version": traj.version, "convention": traj.convention,
            "frames": [dict(camera_to_dict(c), role=r)
                       for c, r in zip(traj.cameras, traj.roles)]}


def trajectory_from_dict(body: dict) -> TrajectoryFile:
    frames = _require(body, "frames", "trajectory")
    cameras = [camera_from_dict(f) for f in frames]
    roles = [_require(f, "role", "trajectory frame") for f in frames]
    return TrajectoryFile(cameras=tuple(cameras), roles=tuple(roles),
                          version=int(body.get("version", TRAJECTORY_VERSION)),
                          convention=body.get("convention", TRAJECTORY_CONVENTION))


def _ref_to_dict(ref: FrameRef) -> dict:
    return {"source": ref.source, "index": ref.index}


def _ref_from_dict(body: dict) -> FrameRef:
    return FrameRef(source=_require(body, "source", "frame ref"),
                    index=body.get("index"))


def _config_to_dict(config: PlannerConfig) -> dict:
    return {"context_window": config.context_window, "strategy": config.strategy,
            "cfg_scale": config.cfg_scale, "seed": config.seed,
            "anchors_per_pass": config.anchors_per_pass,
            "retrieval_count": config.retrieval_count,
            "allow_extension": config.allow_extension,
            "retrieval_mode": config.retrieval_mode,
            "direction_weight": config.direction_weight}


def _config_from_dict(body: dict) -> PlannerConfig:
    return PlannerConfig(
        context_window=int(body.get("context_window", 21)),
        strategy=body.get("strategy", "auto"),
        cfg_scale=float(body.get("cfg_scale", 3.0)),
        seed=int(body.get("seed", 0)),
        anchors_per_pass=body.get("anchors_per_pass"),
        retrieval_count=body.get("retrieval_count"),
        allow_extension=body.get("allow_extension"),
        retrieval_mode=body.get("retrieval_mode", "spatial"),
        direction_weight=float(body.get("direction_weight", 1.0)))


def plan_to_dict(plan: SamplingPlan) -> dict:
    return {
        "version": PLAN_VERSION,
        "request": {
            "input_cameras": [camera_to_dict(c) for c in plan.request.input_cameras],
            "target_cameras": [camera_to_dict(c) for c in plan.request.target_cameras],
            "task": plan.request.task,
            "ordered_targets": plan.request.ordered_targets,
        },
        "config": _config_to_dict(plan.config),
        "passes": [{
            "id": fp.id, "kind": fp.kind, "ordered": fp.ordered,
            "extended": fp.extended,
            "cond": [_ref_to_dict(r) for r in fp.conditioning],
            "gen": [_ref_to_dict(r) for r in fp.generation],
            "deps": list(fp.deps), "seed": fp.seed, "cfg_scale": fp.cfg_scale,
        } for fp in plan.passes],
        "anchor_cameras": [camera_to_dict(c) for c in plan.anchor_cameras],
        "anchor_target_indices": list(plan.anchor_target_indices),
    }


def plan_from_dict(body: dict) -> SamplingPlan:
    req_body = _require(body, "request", "plan")
    request = ViewRequest(
        tuple(camera_from_dict(c) for c in _require(req_body, "input_cameras", "plan request")),
        tuple(camera_from_dict(c) for c in _require(req_body, "target_cameras", "plan request")),
        task=req_body.get("task", "trajectory"),
        ordered_targets=bool(req_body.get("ordered_targets", True)))
    config = _config_from_dict(body.get("config", {}))
    passes = tuple(
        ForwardPass(id=int(p["id"]), kind=p["kind"],
                    conditioning=tuple(_ref_from_dict(r) for r in p["cond"]),
                    generation=tuple(_ref_from_dict(r) for r in p["gen"]),
                    ordered=bool(p["ordered"]), extended=bool(p["extended"]),
                    deps=tuple(int(d) for d in p["deps"]),
                    seed=int(p["seed"]), cfg_scale=float(p["cfg_scale"]))
        for p in _require(body, "passes", "plan"))
    return SamplingPlan(
        request=request, config=config, passes=passes,
        anchor_cameras=tuple(camera_from_dict(c) for c in body.get("anchor_cameras", [])),
        anchor_target_indices=tuple(body.get("anchor_target_indices", [])))


@dataclass(frozen=True)
class ManifestScene:
    name: str
    trajectory_file: str
    reference_dir: str | None = None
    split_tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SceneManifest:
    scenes: tuple[ManifestScene, ...]

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        names = [s.name for s in self.scenes]
        if len(set(names)) != len(names):
            raise FormatError("manifest: scene names must be unique")


def manifest_to_dict(manifest: SceneManifest) -> dict:
    return {"scenes": [{"name": s.name, "trajectory_file": s.trajectory_file,
                        "reference_dir": s.reference_dir,
                        "split_tags": list(s.split_tags)} for s in manifest.scenes]}


def manifest_from_dict(body: dict) -> SceneManifest:
    scenes = tuple(
        ManifestScene(name=_require(s, "name", "manifest scene"),
                      trajectory_file=_require(s, "trajectory_file", "manifest scene"),
                      reference_dir=s.get("reference_dir"),
                      split_tags=tuple(s.get("split_tags", [])))
        for s in _require(body, "scenes", "manifest"))
    return SceneManifest(scenes=scenes)


def report_to_dict(report: MetricReport) -> dict:
    return {"per_frame": {k: list(v) for k, v in report.per_frame.items()},
            "means": dict(report.means),
            "lpips": report.lpips,
            "motion_smoothness": report.motion_smoothness}


def report_from_dict(body: dict) -> MetricReport:
    report = MetricReport(per_frame={k: [float(x) for x in v]
                                     for k, v in body.get("per_frame", {}).items()},
                          means={k: float(v) for k, v in body.get("means", {}).items()},
                          lpips=body.get("lpips"),
                          motion_smoothness=body.get("motion_smoothness"))
    return report


def save_json(body: dict, path) -> None:
    Path(path).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())


def report_to_csv(report: MetricReport) -> str:
    """Delimited per-frame table with a trailing mean row."""
    names = sorted(report.per_frame)
    lines = ["frame," + ",".join(names)]
    for i in range(report.frame_count):
        cells = []
        for name in names:
            values = report.per_frame[name]
            cells.append(repr(values[i]) if i < len(values) else "")
        lines.append(f"{i}," + ",".join(cells))
    lines.append("mean," + ",".join(repr(report.means[n]) for n in names))
    return "\n".join(lines) + "\n"


def save_frame_png(frame: Frame, path) -> None:
    from .backends import frame_to_png_bytes

    Path(path).write_bytes(frame_to_png_bytes(frame))


def load_frame_png(path) -> Frame:
    from .backends import frame_from_png_bytes

    return frame_from_png_bytes(Path(path).read_bytes())


def load_frame_dir(directory, prefix: str = "frame_") -> list[Frame]:
    paths = sorted(Path(directory).glob(f"{prefix}*.png"))
    if not paths:
        raise FormatError(f"no {prefix}*.png frames under {directory}")
    return [load_frame_png(p) for p in paths]
