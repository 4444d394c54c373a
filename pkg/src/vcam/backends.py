"""Generative-renderer backends: the bundled oracle and an HTTP client for
real model servers speaking the same wire contract."""

from __future__ import annotations

import base64
import io
import json
import urllib.request
from dataclasses import dataclass

import numpy as np

from .geometry import Camera
from .oracle import (
    Frame,
    FrameMetadata,
    GenerationRequest,
    SyntheticScene,
    build_scene,
    oracle_generate_detailed,
    oracle_matches,
    render_ground_truth,
)


@dataclass(frozen=True)
class BackendResult:
    frames: tuple[Frame, ...]
    metadata: tuple[FrameMetadata, ...] | None = None


class OracleBackend:
    """Deterministic synthetic-scene backend; also provides ground truth."""

    def __init__(self, scene: SyntheticScene | int):
        self.scene = scene if isinstance(scene, SyntheticScene) else build_scene(scene)

    def generate(self, request: GenerationRequest) -> BackendResult:
        frames, metadata = oracle_generate_detailed(self.scene, request)
        return BackendResult(frames=tuple(frames), metadata=tuple(metadata))

    def ground_truth(self, camera: Camera) -> Frame:
        return render_ground_truth(self.scene, camera)

    def matches(self, cam_a: Camera, cam_b: Camera, max_matches: int = 256):
        return oracle_matches(self.scene, cam_a, cam_b, max_matches=max_matches)


def frame_to_png_bytes(frame: Frame) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.asarray(frame.rgb)).save(buf, format="PNG")
    return buf.getvalue()


def frame_from_png_bytes(data: bytes) -> Frame:
    from PIL import Image

    img = Image.open(io.BytesIO(data)).convert("RGB")
    rgb = np.asarray(img, dtype=np.uint8)
    return Frame(width=rgb.shape[1], height=rgb.shape[0], rgb=rgb)


def encode_frame(frame: Frame) -> str:
    return base64.b64encode(frame_to_png_bytes(frame)).decode("ascii")


def decode_frame(payload: str) -> Frame:
    return frame_from_png_bytes(base64.b64decode(payload))


def request_to_dict(request: GenerationRequest) -> dict:
    from .formats import camera_to_dict

    return {
        "conditioning": [
            {"camera": camera_to_dict(c.camera), "frame": encode_frame(c.frame),
             "content_hash": c.content_hash}
            for c in request.conditioning
        ],
        "target_cameras": [camera_to_dict(c) for c in request.target_cameras],
        "ordered": request.ordered,
        "seed": request.seed,
        "cfg_scale": request.cfg_scale,
    }


def request_from_dict(body: dict) -> GenerationRequest:
    from .formats import FormatError, camera_from_dict
    from .oracle import ConditioningFrame

    for field_name in ("conditioning", "target_cameras"):
        if field_name not in body:
            raise FormatError(f"generation request: missing field {field_name!r}")
    try:
        conditioning = tuple(
            ConditioningFrame(camera=camera_from_dict(c["camera"]),
                              frame=decode_frame(c["frame"]),
                              content_hash=c.get("content_hash", ""))
            for c in body["conditioning"]
        )
    except KeyError as exc:
        raise FormatError(f"generation request conditioning: missing {exc.args[0]!r}") from exc
    targets = tuple(camera_from_dict(c) for c in body["target_cameras"])
    return GenerationRequest(conditioning=conditioning, target_cameras=targets,
                             ordered=bool(body.get("ordered", False)),
                             seed=int(body.get("seed", 0)),
                             cfg_scale=float(body.get("cfg_scale", 3.0)))


class HttpBackend:
    """Client for a remote generative renderer exposing POST /api/generate
    with the package's JSON wire format (frames travel as base64 PNG)."""

    def __init__(self, url: str, timeout: float = 120.0):
        self.url = url.rstrip("/")
        self.timeout = timeout

    def generate(self, request: GenerationRequest) -> BackendResult:
        payload = json.dumps(request_to_dict(request)).encode()
        req = urllib.request.Request(self.url + "/api/generate", data=payload,
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            body = json.loads(resp.read().decode())
        frames = tuple(decode_frame(f) for f in body["frames"])
        return BackendResult(frames=frames, metadata=None)
