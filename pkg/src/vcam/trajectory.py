"""Camera path presets (orbit, spiral, pan, zooms, dolly zoom) and keyframed
paths, emitted as ordered Camera lists."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .geometry import (
    Camera,
    GeometryError,
    Intrinsics,
    Pose,
    camera_descriptor,
    look_at_pose,
)

PRESET_KINDS = ("orbit", "spiral", "pan", "zoom_in", "zoom_out", "dolly_zoom", "keyframes")


class TrajectoryError(ValueError):
    """Raised for unknown kinds or invalid preset parameters."""


@dataclass(frozen=True)
class TrajectorySpec:
    """A named camera-path preset plus its parameters.

    `parameters` is kind-specific; common keys are center (3-vector), radius,
    frame_count, elevation (radians), closed, focal_scale, and keyframes
    (list of (Camera, time)). Unknown kinds are rejected at generation time.
    """

    kind: str
    base_intrinsics: Intrinsics
    parameters: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        frame_count = int(self.parameters.get("frame_count", 1))
        if frame_count < 1:
            raise TrajectoryError("frame_count must be >= 1")
        radius = self.parameters.get("radius")
        if radius is not None and radius <= 0:
            raise TrajectoryError("radius must be positive")
        keyframes = self.parameters.get("keyframes")
        if keyframes is not None:
            times = [t for _, t in keyframes]
            if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
                raise TrajectoryError("keyframe times must be strictly increasing")


def _param(spec: TrajectorySpec, name: str, default):
    return spec.parameters.get(name, default)


def _center(spec: TrajectorySpec) -> np.ndarray:
    return np.asarray(_param(spec, "center", (0.0, 0.0, 0.0)), dtype=np.float64)


def generate(spec: TrajectorySpec) -> list[Camera]:
    """Generate the camera list for a preset.

    Orbit: equally spaced azimuths on a circle of the given radius/elevation
    about `center`, each frame looking at the center with world +z up. Closed
    orbits put frame i at azimuth sweep * i / n so frame 0 recurs implicitly;
    open orbits include both endpoints of the sweep.

    Spiral: forward-facing ellipse in the local xy plane with a sinusoidal
    depth offset (one oscillation per loop), looking at a focus point in
    front of the path.

    Pan: linear translation perpendicular to the (fixed, +z) view axis.

    Zooms: pose fixed at `center`; fx, fy scaled geometrically from 1x to
    `focal_scale` across frames.

    Dolly zoom: camera backs along the view axis from distance_start to
    distance_end while focal length scales with distance so the subject
    plane's projected extent stays constant.
    """
    if spec.kind == "orbit":
        return _orbit(spec)
    if spec.kind == "spiral":
        return _spiral(spec)
    if spec.kind == "pan":
        return _pan(spec)
    if spec.kind in ("zoom_in", "zoom_out"):
        return _zoom(spec)
    if spec.kind == "dolly_zoom":
        return _dolly_zoom(spec)
    if spec.kind == "keyframes":
        keyframes = _param(spec, "keyframes", None)
        if not keyframes:
            raise TrajectoryError("keyframes preset requires keyframes")
        return interpolate_keyframes(keyframes, int(_param(spec, "frame_count", len(keyframes))))
    raise TrajectoryError(f"unknown trajectory kind {spec.kind!r}")


def _orbit(spec: TrajectorySpec) -> list[Camera]:
    center = _center(spec)
    radius = float(_param(spec, "radius", 1.0))
    n = int(_param(spec, "frame_count", 1))
    elevation = float(_param(spec, "elevation", 0.0))
    closed = bool(_param(spec, "closed", True))
    sweep = float(_param(spec, "sweep", 2.0 * math.pi))
    if closed or n == 1:
        azimuths = [sweep * i / n for i in range(n)]
    else:
        azimuths = [sweep * i / (n - 1) for i in range(n)]
    ring = radius * math.cos(elevation)
    z_off = radius * math.sin(elevation)
    cams = []
    for az in azimuths:
        eye = center + np.array([ring * math.cos(az), ring * math.sin(az), z_off])
        cams.append(Camera(look_at_pose(eye, center), spec.base_intrinsics))
    return cams


def _spiral(spec: TrajectorySpec) -> list[Camera]:
    center = _center(spec)
    radius = float(_param(spec, "radius", 1.0))
    n = int(_param(spec, "frame_count", 1))
    loops = float(_param(spec, "loops", 1.0))
    y_scale = float(_param(spec, "y_scale", 0.5))
    depth_scale = float(_param(spec, "depth_scale", 0.25))
    focus_distance = float(_param(spec, "focus_distance", 4.0 * radius))
    focus = center + np.array([0.0, 0.0, focus_distance])
    cams = []
    for i in range(n):
        theta = 2.0 * math.pi * loops * (i / n if n > 1 else 0.0)
        eye = center + np.array([radius * math.cos(theta),
                                 radius * y_scale * math.sin(theta),
                                 radius * depth_scale * math.sin(theta)])
        cams.append(Camera(look_at_pose(eye, focus, up=(0.0, -1.0, 0.0)),
                           spec.base_intrinsics))
    return cams


def _pan(spec: TrajectorySpec) -> list[Camera]:
    center = _center(spec)
    extent = float(_param(spec, "radius", 1.0))
    n = int(_param(spec, "frame_count", 1))
    cams = []
    for i in range(n):
        s = -1.0 + 2.0 * i / (n - 1) if n > 1 else 0.0
        eye = center + np.array([s * extent, 0.0, 0.0])
        cams.append(Camera(Pose(np.eye(3), eye), spec.base_intrinsics))
    return cams


def _zoom(spec: TrajectorySpec) -> list[Camera]:
    center = _center(spec)
    n = int(_param(spec, "frame_count", 1))
    default_scale = 2.0 if spec.kind == "zoom_in" else 0.5
    focal_scale = float(_param(spec, "focal_scale", default_scale))
    if focal_scale <= 0:
        raise TrajectoryError("focal_scale must be positive")
    pose = Pose(np.eye(3), center)
    cams = []
    for i in range(n):
        t = i / (n - 1) if n > 1 else 0.0
        factor = focal_scale ** t
        cams.append(Camera(pose, spec.base_intrinsics.scaled_focal(factor)))
    return cams


def _dolly_zoom(spec: TrajectorySpec) -> list[Camera]:
    center = _center(spec)
    n = int(_param(spec, "frame_count", 1))
    d0 = float(_param(spec, "distance_start", 4.0))
    d1 = float(_param(spec, "distance_end", 2.0))
    if d0 <= 0 or d1 <= 0:
        raise TrajectoryError("dolly distances must be positive")
    cams = []
    for i in range(n):
        t = i / (n - 1) if n > 1 else 0.0
        d = d0 + (d1 - d0) * t
        eye = center - np.array([0.0, 0.0, d])
        # f * w / d is the projected extent of a width-w subject at the
        # center plane; scaling f by d/d0 keeps it constant.
        intr = spec.base_intrinsics.scaled_focal(d / d0)
        cams.append(Camera(look_at_pose(eye, center), intr))
    return cams


def _lerp_intrinsics(a: Intrinsics, b: Intrinsics, t: float) -> Intrinsics:
    if (a.width, a.height) != (b.width, b.height):
        raise TrajectoryError("cannot interpolate intrinsics of different image sizes")
    u = 1.0 - t
    return Intrinsics(u * a.fx + t * b.fx, u * a.fy + t * b.fy,
                      u * a.cx + t * b.cx, u * a.cy + t * b.cy, a.width, a.height)


def interpolate_keyframes(keyframes: list[tuple[Camera, float]],
                          frame_count: int) -> list[Camera]:
    """Sample a keyframed path uniformly in time.

    Positions and intrinsics interpolate linearly between bracketing keyframes;
    rotations interpolate with piecewise shortest-arc slerp.
    """
    if len(keyframes) < 2:
        raise TrajectoryError("need at least 2 keyframes")
    if frame_count < 1:
        raise TrajectoryError("frame_count must be >= 1")
    times = np.array([t for _, t in keyframes], dtype=np.float64)
    if np.any(np.diff(times) <= 0):
        raise TrajectoryError("keyframe times must be strictly increasing")
    cams = [cam for cam, _ in keyframes]
    rotations = Rotation.from_matrix(np.stack([c.pose.rotation for c in cams]))
    slerp = Slerp(times, rotations)
    positions = np.stack([c.position for c in cams])

    if frame_count == 1:
        samples = np.array([times[0]])
    else:
        samples = np.linspace(times[0], times[-1], frame_count)
    out = []
    for t in samples:
        seg = min(np.searchsorted(times, t, side="right") - 1, len(times) - 2)
        seg = max(seg, 0)
        local = (t - times[seg]) / (times[seg + 1] - times[seg])
        pos = (1.0 - local) * positions[seg] + local * positions[seg + 1]
        rot = slerp(min(max(t, times[0]), times[-1])).as_matrix()
        intr = _lerp_intrinsics(cams[seg].intrinsics, cams[seg + 1].intrinsics, local)
        out.append(Camera(Pose(rot, pos), intr))
    return out


def _slerp_pair(cam_a: Camera, cam_b: Camera, t: float) -> Camera:
    rots = Rotation.from_matrix(np.stack([cam_a.pose.rotation, cam_b.pose.rotation]))
    rot = Slerp([0.0, 1.0], rots)(t).as_matrix()
    pos = (1.0 - t) * cam_a.position + t * cam_b.position
    return Camera(Pose(rot, pos), _lerp_intrinsics(cam_a.intrinsics, cam_b.intrinsics, t))


def resample_uniform(cameras: list[Camera], frame_count: int) -> list[Camera]:
    """Resample a path to frames equally spaced in descriptor arc length.

    Endpoints are preserved; a zero-length path degenerates to the first
    camera repeated.
    """
    if len(cameras) < 2:
        raise TrajectoryError("need at least 2 cameras to resample")
    if frame_count < 1:
        raise TrajectoryError("frame_count must be >= 1")
    descs = np.stack([camera_descriptor(c) for c in cameras])
    seg_len = np.linalg.norm(np.diff(descs, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = arc[-1]
    if total < 1e-15:
        return [cameras[0]] * frame_count
    if frame_count == 1:
        return [cameras[0]]
    targets = np.linspace(0.0, total, frame_count)
    out = []
    for s in targets:
        seg = min(np.searchsorted(arc, s, side="right") - 1, len(cameras) - 2)
        seg = max(seg, 0)
        width = arc[seg + 1] - arc[seg]
        local = 0.0 if width < 1e-15 else (s - arc[seg]) / width
        out.append(_slerp_pair(cameras[seg], cameras[seg + 1], float(local)))
    out[0] = cameras[0]
    out[-1] = cameras[-1]
    return out
