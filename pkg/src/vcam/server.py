"""HTTP service exposing planning, previews, oracle runs, and the generative
backend wire contract. Bodies use the same JSON serialization as the on-disk
formats; frames travel as base64 PNG."""

from __future__ import annotations

import json
import logging
import threading
import traceback
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .backends import OracleBackend, encode_frame, request_from_dict
from .executor import execute
from .formats import (
    FormatError,
    TrajectoryFile,
    camera_from_dict,
    intrinsics_from_dict,
    plan_from_dict,
    plan_to_dict,
    trajectory_from_dict,
    trajectory_to_dict,
)
from .geometry import Camera, Intrinsics
from .metrics import cross_pass_disagreement, psnr, ssim
from .oracle import build_scene, oracle_generate, render_ground_truth
from .planner import make_plan
from .trajectory import TrajectorySpec, generate

logger = logging.getLogger(__name__)

PRESET_SCHEMAS = {
    "orbit": {"center": {"type": "vec3", "default": [0, 0, 0]},
              "radius": {"type": "number", "default": 2.0},
              "frame_count": {"type": "integer", "default": 21},
              "elevation": {"type": "number", "default": 0.0},
              "closed": {"type": "boolean", "default": True},
              "sweep": {"type": "number", "default": 6.283185307179586}},
    "spiral": {"center": {"type": "vec3", "default": [0, 0, 0]},
               "radius": {"type": "number", "default": 1.0},
               "frame_count": {"type": "integer", "default": 21},
               "loops": {"type": "number", "default": 1.0},
               "y_scale": {"type": "number", "default": 0.5},
               "depth_scale": {"type": "number", "default": 0.25},
               "focus_distance": {"type": "number", "default": 4.0}},
    "pan": {"center": {"type": "vec3", "default": [0, 0, 0]},
            "radius": {"type": "number", "default": 1.0},
            "frame_count": {"type": "integer", "default": 21}},
    "zoom_in": {"center": {"type": "vec3", "default": [0, 0, 0]},
                "frame_count": {"type": "integer", "default": 21},
                "focal_scale": {"type": "number", "default": 2.0}},
    "zoom_out": {"center": {"type": "vec3", "default": [0, 0, 0]},
                 "frame_count": {"type": "integer", "default": 21},
                 "focal_scale": {"type": "number", "default": 0.5}},
    "dolly_zoom": {"center": {"type": "vec3", "default": [0, 0, 0]},
                   "frame_count": {"type": "integer", "default": 21},
                   "distance_start": {"type": "number", "default": 4.0},
                   "distance_end": {"type": "number", "default": 2.0}},
}

_DEFAULT_INTRINSICS = Intrinsics(fx=64.0, fy=64.0, cx=32.0, cy=32.0, width=64, height=64)


class _BadRequest(ValueError):
    pass


def _preview_camera(camera: Camera, max_dim: int) -> Camera:
    intr = camera.intrinsics
    longest = max(intr.width, intr.height)
    if longest <= max_dim:
        return camera
    s = max_dim / longest
    scaled = Intrinsics(fx=intr.fx * s, fy=intr.fy * s, cx=intr.cx * s, cy=intr.cy * s,
                        width=max(1, round(intr.width * s)),
                        height=max(1, round(intr.height * s)))
    return Camera(pose=camera.pose, intrinsics=scaled)


class WorkbenchService:
    """Stateless planning/preview handlers plus a serialized run queue."""

    def __init__(self, scene_seed: int = 0):
        self.scene_seed = scene_seed
        self._run_lock = threading.Lock()  # run jobs execute one at a time

    # Each handler takes the parsed JSON body and returns a JSON-able dict.

    def health(self, _body) -> dict:
        return {"status": "ok"}

    def presets(self, _body) -> dict:
        return {"presets": [{"kind": kind, "params": schema}
                            for kind, schema in sorted(PRESET_SCHEMAS.items())]}

    def trajectory_preset(self, body: dict) -> dict:
        kind = body.get("kind")
        if kind not in PRESET_SCHEMAS:
            raise _BadRequest(f"kind: unknown preset {kind!r}")
        params = dict(body.get("params", {}))
        if "center" in params:
            params["center"] = tuple(params["center"])
        intr = (intrinsics_from_dict(body["intrinsics"])
                if "intrinsics" in body else _DEFAULT_INTRINSICS)
        cameras = generate(TrajectorySpec(kind=kind, base_intrinsics=intr,
                                          parameters=params))
        k = min(max(int(body.get("input_count", 1)), 1), len(cameras))
        roles = ["input"] * k + ["target"] * (len(cameras) - k)
        return trajectory_to_dict(TrajectoryFile(cameras=tuple(cameras),
                                                 roles=tuple(roles)))

    def plan(self, body: dict) -> dict:
        if "trajectory" not in body:
            raise _BadRequest("trajectory: field required")
        traj = trajectory_from_dict(body["trajectory"])
        from .formats import _config_from_dict, prepare_request

        config = _config_from_dict(body.get("config", {}))
        task = body.get("task", "trajectory")
        # Same preparation defaults as the CLI plan path.
        request = prepare_request(traj, task=task,
                                  normalize=bool(body.get("normalize", True)),
                                  unit_length=float(body.get("unit_length", 2.0)))
        anchors = None
        if body.get("anchor_trajectory"):
            anchors = list(trajectory_from_dict(body["anchor_trajectory"]).cameras)
        plan = make_plan(request, config, anchor_cameras=anchors)
        return plan_to_dict(plan)

    def preview(self, body: dict) -> dict:
        if "cameras" in body:
            cameras = [camera_from_dict(c) for c in body["cameras"]]
        elif "trajectory" in body:
            cameras = list(trajectory_from_dict(body["trajectory"]).cameras)
        else:
            raise _BadRequest("cameras: field required (or trajectory)")
        if not cameras:
            raise _BadRequest("cameras: must be non-empty")
        max_dim = int(body.get("max_dim", 64))
        scene = build_scene(int(body.get("scene_seed", self.scene_seed)))
        frames = [render_ground_truth(scene, _preview_camera(c, max_dim))
                  for c in cameras]
        return {"frames": [encode_frame(f) for f in frames]}

    def run(self, body: dict) -> dict:
        if "plan" not in body:
            raise _BadRequest("plan: field required")
        plan = plan_from_dict(body["plan"])
        backend = OracleBackend(build_scene(int(body.get("scene_seed", self.scene_seed))))
        with self._run_lock:
            result = execute(plan, backend)
        gt = {k: backend.ground_truth(plan.request.target_cameras[k])
              for k in result.frames}
        psnrs = [psnr(result.frames[k], gt[k]) for k in sorted(result.frames)]
        finite = [v for v in psnrs if v != float("inf")]
        metrics = {
            "mean_psnr_vs_ground_truth": (sum(finite) / len(finite)) if finite else None,
            "exact_frames": sum(1 for v in psnrs if v == float("inf")),
        }
        if min(plan.request.target_cameras[0].intrinsics.width,
               plan.request.target_cameras[0].intrinsics.height) >= 11:
            ssims = [ssim(result.frames[k], gt[k]) for k in sorted(result.frames)]
            metrics["mean_ssim_vs_ground_truth"] = sum(ssims) / len(ssims)
        if result.target_metadata:
            report = cross_pass_disagreement(result, backend.scene, adjacent_only=True)
            metrics["adjacent_disagreement"] = report.mean
        return {"frames": {str(k): encode_frame(result.frames[k])
                           for k in sorted(result.frames)},
                "anchor_frames": {str(j): encode_frame(result.anchor_frames[j])
                                  for j in sorted(result.anchor_frames)},
                "metrics": metrics}

    def generate(self, body: dict) -> dict:
        scene = build_scene(int(body.get("scene_seed", self.scene_seed)))
        request = request_from_dict(body)
        frames = oracle_generate(scene, request)
        return {"frames": [encode_frame(f) for f in frames]}


def _make_handler(service: WorkbenchService):
    get_routes = {
        "/api/health": service.health,
        "/api/presets": service.presets,
    }
    post_routes = {
        "/api/trajectory/preset": service.trajectory_preset,
        "/api/plan": service.plan,
        "/api/preview": service.preview,
        "/api/run": service.run,
        "/api/generate": service.generate,
    }

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            logger.info("http: " + fmt, *args)

        def _send(self, status: int, payload: dict):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):
            self._send(204, {})

        def do_GET(self):
            handler = get_routes.get(self.path)
            if handler is None:
                self._send(404, {"error": "not_found", "detail": self.path})
                return
            self._dispatch(handler, {})

        def do_POST(self):
            handler = post_routes.get(self.path)
            if handler is None:
                self._send(404, {"error": "not_found", "detail": self.path})
                return
            try:
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length) if length else b"{}"
                body = json.loads(raw.decode() or "{}")
                if not isinstance(body, dict):
                    raise _BadRequest("body: expected a JSON object")
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                self._send(400, {"error": "bad_request", "detail": f"body: {exc}"})
                return
            self._dispatch(handler, body)

        def _dispatch(self, handler, body: dict):
            try:
                self._send(200, handler(body))
            except (_BadRequest, FormatError, ValueError) as exc:
                self._send(400, {"error": "bad_request", "detail": str(exc)})
            except Exception as exc:  # noqa: BLE001 - report, do not crash the server
                logger.error("internal error: %s\n%s", exc, traceback.format_exc())
                self._send(500, {"error": "internal", "detail": str(exc)})

    return Handler


def make_server(port: int = 0, scene_seed: int = 0) -> ThreadingHTTPServer:
    """Bind the service; port 0 picks a free port (server.server_port)."""
    service = WorkbenchService(scene_seed=scene_seed)
    server = ThreadingHTTPServer(("127.0.0.1", port), _make_handler(service))
    server.daemon_threads = True
    return server


def serve(port: int = 8080, scene_seed: int = 0) -> None:
    server = make_server(port=port, scene_seed=scene_seed)
    print(f"vcam service on http://127.0.0.1:{server.server_port}")
    try:
        server.serve_forever()
    finally:
        server.server_close()
