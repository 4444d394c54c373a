"""Camera representations, pose algebra, scene normalization, Plucker ray maps,
and epipolar geometry.

Conventions used throughout the package:
  - Poses are camera-to-world. The camera frame is x-right, y-down, z-forward
    (OpenCV style). A camera's position in world coordinates is its pose
    translation.
  - Image coordinates are (u, v) with u along columns (width) and v along rows
    (height). Rays are cast through pixel centers, i.e. pixel (row i, col j)
    maps to image point (j + 0.5, i + 0.5).
  - All functions are pure and operate on immutable values; they are safe to
    call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_ORTHO_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for invalid geometric inputs (degenerate poses, bad shapes)."""


def _as_matrix3(value) -> np.ndarray:
    m = np.asarray(value, dtype=np.float64)
    if m.shape != (3, 3):
        raise GeometryError(f"expected 3x3 rotation, got shape {m.shape}")
    return m


def _as_vector3(value) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64).reshape(-1)
    if v.shape != (3,):
        raise GeometryError(f"expected 3-vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Pose:
    """SE(3) camera-to-world transform.

    rotation: 3x3 orthonormal matrix with det +1 (checked on construction).
    translation: camera position in world coordinates (scene units).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _as_matrix3(self.rotation)
        rot.setflags(write=False)
        tr = _as_vector3(self.translation)
        tr.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise GeometryError(f"rotation not orthonormal (|R'R - I|_inf = {err:.3g})")
        if np.linalg.det(rot) < 0:
            raise GeometryError("rotation has negative determinant")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def compose(self, other: "Pose") -> "Pose":
        """Return self @ other (apply other first, then self)."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous camera-to-world matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise GeometryError(f"expected 4x4 matrix, got shape {m.shape}")
        if np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-12:
            raise GeometryError("bottom row of pose matrix must be (0, 0, 0, 1)")
        return Pose(m[:3, :3], m[:3, 3])

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        """Map (..., 3) points from camera frame to world frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    @property
    def forward(self) -> np.ndarray:
        """Unit view direction (camera +z axis) in world coordinates."""
        return self.rotation[:, 2]


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise GeometryError("image size must be at least 1x1")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def scaled_focal(self, factor: float) -> "Intrinsics":
        return Intrinsics(self.fx * factor, self.fy * factor,
                          self.cx, self.cy, self.width, self.height)


@dataclass(frozen=True)
class Camera:
    """A posed pinhole camera; the unit of all geometry in this package."""

    pose: Pose
    intrinsics: Intrinsics

    @property
    def position(self) -> np.ndarray:
        return self.pose.translation


@dataclass(frozen=True)
class PluckerMap:
    """Per-pixel ray map: rays[i, j] = (d, m) with d a unit direction in the
    world frame and m = o x d the moment about the world origin."""

    width: int
    height: int
    rays: np.ndarray  # (height, width, 6)

    def __post_init__(self):
        rays = np.asarray(self.rays, dtype=np.float64)
        if rays.shape != (self.height, self.width, 6):
            raise GeometryError(f"ray map shape {rays.shape} does not match size")
        object.__setattr__(self, "rays", rays)

    @property
    def directions(self) -> np.ndarray:
        return self.rays[..., :3]

    @property
    def moments(self) -> np.ndarray:
        return self.rays[..., 3:]


@dataclass(frozen=True)
class NormalizationParams:
    """Record of a scene-scale normalization: translations were multiplied by
    `scale` so the largest camera-position infinity norm equals `unit_length`."""

    reference_index: int
    scale: float
    unit_length: float

    def __post_init__(self):
        if self.scale <= 0:
            raise GeometryError("scale must be positive")
        if self.unit_length <= 0:
            raise GeometryError("unit_length must be positive")


@dataclass(frozen=True)
class MatchSet:
    """Pixel correspondences between two images: points_a[i] <-> points_b[i]."""

    points_a: np.ndarray  # (n, 2)
    points_b: np.ndarray  # (n, 2)

    def __post_init__(self):
        pa = np.atleast_2d(np.asarray(self.points_a, dtype=np.float64))
        pb = np.atleast_2d(np.asarray(self.points_b, dtype=np.float64))
        if pa.shape != pb.shape or pa.ndim != 2 or pa.shape[1] != 2:
            raise GeometryError("match sets must be matching (n, 2) arrays")
        object.__setattr__(self, "points_a", pa)
        object.__setattr__(self, "points_b", pb)

    def __len__(self) -> int:
        return self.points_a.shape[0]


def relative_to_first(cameras: list[Camera], reference_index: int = 0) -> list[Camera]:
    """Re-express all poses relative to the reference camera.

    The output pose at `reference_index` is the identity; all pairwise relative
    transforms are preserved exactly (this is only a change of world frame).
    """
    if not cameras:
        raise GeometryError("no cameras")
    if not 0 <= reference_index < len(cameras):
        raise GeometryError(f"reference index {reference_index} out of range")
    ref_inv = cameras[reference_index].pose.inverse()
    return [Camera(ref_inv.compose(cam.pose), cam.intrinsics) for cam in cameras]


def normalize_scene(cameras: list[Camera],
                    unit_length: float = 2.0) -> tuple[list[Camera], NormalizationParams]:
    """Scale camera translations so max |position|_inf equals `unit_length`.

    Callers compose with relative_to_first; intrinsics and rotations are left
    untouched. The all-coincident (zero-extent) cloud degenerates to scale 1.
    """
    if unit_length <= 0:
        raise GeometryError("unit_length must be positive")
    if not cameras:
        raise GeometryError("no cameras")
    positions = np.stack([cam.position for cam in cameras])
    extent = np.abs(positions).max()
    scale = 1.0 if extent < 1e-15 else unit_length / extent
    scaled = [Camera(Pose(cam.pose.rotation, cam.pose.translation * scale), cam.intrinsics)
              for cam in cameras]
    params = NormalizationParams(reference_index=0, scale=scale, unit_length=unit_length)
    return scaled, params


def pixel_centers(intrinsics: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Image-point grids (u, v) at pixel centers, each (height, width)."""
    u = np.arange(intrinsics.width, dtype=np.float64) + 0.5
    v = np.arange(intrinsics.height, dtype=np.float64) + 0.5
    return np.meshgrid(u, v)


def camera_rays(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """World-frame origin and unit directions for all pixel-center rays.

    Returns (origin (3,), directions (height, width, 3)).
    """
    intr = camera.intrinsics
    u, v = pixel_centers(intr)
    d_cam = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy,
                      np.ones_like(u)], axis=-1)
    d_world = d_cam @ camera.pose.rotation.T
    d_world /= np.linalg.norm(d_world, axis=-1, keepdims=True)
    return camera.position.copy(), d_world


def plucker_map(camera: Camera) -> PluckerMap:
    """Per-pixel Plucker coordinates (d, m = o x d) for camera conditioning."""
    origin, directions = camera_rays(camera)
    moments = np.cross(np.broadcast_to(origin, directions.shape), directions)
    rays = np.concatenate([directions, moments], axis=-1)
    return PluckerMap(width=camera.intrinsics.width, height=camera.intrinsics.height,
                      rays=rays)


def project(camera: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (..., 3) world points into the image.

    Returns ((..., 2) image points, (...,) depth along the camera z axis).
    Points behind the camera get negative depth; callers filter.
    """
    pts = np.asarray(points, dtype=np.float64)
    pose = camera.pose
    cam_pts = (pts - pose.translation) @ pose.rotation
    z = cam_pts[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.intrinsics.fx * cam_pts[..., 0] / z + camera.intrinsics.cx
        v = camera.intrinsics.fy * cam_pts[..., 1] / z + camera.intrinsics.cy
    return np.stack([u, v], axis=-1), z


def look_at_pose(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Pose at `eye` with forward (+z) toward `target`.

    The image up direction aligns with world `up`; falls back to +y when the
    view axis is within 1e-6 of the up axis.
    """
    eye = _as_vector3(eye)
    target = _as_vector3(target)
    up = _as_vector3(up)
    fwd = target - eye
    norm = np.linalg.norm(fwd)
    if norm < 1e-12:
        raise GeometryError("look-at target coincides with eye")
    fwd = fwd / norm
    up = up / np.linalg.norm(up)
    if np.linalg.norm(np.cross(fwd, up)) < 1e-6:
        up = np.array([0.0, 1.0, 0.0])
        if np.linalg.norm(np.cross(fwd, up)) < 1e-6:
            up = np.array([1.0, 0.0, 0.0])
    x_axis = np.cross(fwd, up)
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(fwd, x_axis)
    y_axis /= np.linalg.norm(y_axis)
    return Pose(np.column_stack([x_axis, y_axis, fwd]), eye)


def skew(v: np.ndarray) -> np.ndarray:
    v = _as_vector3(v)
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def fundamental_matrix(cam_a: Camera, cam_b: Camera) -> np.ndarray:
    """Fundamental matrix mapping image-a points to epipolar lines in image b.

    F = Kb^-T [t]x R Ka^-1 for the a-to-b relative transform, scaled to unit
    Frobenius norm. Requires a nonzero baseline.
    """
    rel = cam_b.pose.inverse().compose(cam_a.pose)  # a-cam coords -> b-cam coords
    t = rel.translation
    if np.linalg.norm(t) <= 1e-12:
        raise GeometryError("degenerate epipolar geometry (zero baseline)")
    essential = skew(t) @ rel.rotation
    ka_inv = np.linalg.inv(cam_a.intrinsics.matrix())
    kb_inv = np.linalg.inv(cam_b.intrinsics.matrix())
    f = kb_inv.T @ essential @ ka_inv
    return f / np.linalg.norm(f)


def _point_line_distances(points: np.ndarray, lines: np.ndarray) -> np.ndarray:
    """Distance of 2D points (n, 2) to homogeneous lines (n, 3), in pixels."""
    num = np.abs(lines[:, 0] * points[:, 0] + lines[:, 1] * points[:, 1] + lines[:, 2])
    den = np.hypot(lines[:, 0], lines[:, 1])
    return num / np.maximum(den, 1e-300)


def epipolar_sed(F: np.ndarray, matches: MatchSet,
                 symmetric: bool = True) -> tuple[np.ndarray, float]:
    """Per-match (symmetric) epipolar distances and their mean, in pixels.

    One direction measures the distance from each point_b to its epipolar line
    F x_a; the symmetric variant averages with the reverse direction.
    """
    if len(matches) == 0:
        raise GeometryError("empty match set")
    F = np.asarray(F, dtype=np.float64)
    ones = np.ones((len(matches), 1))
    xa = np.hstack([matches.points_a, ones])
    xb = np.hstack([matches.points_b, ones])
    dist_fwd = _point_line_distances(matches.points_b, xa @ F.T)
    if symmetric:
        dist_bwd = _point_line_distances(matches.points_a, xb @ F)
        dists = 0.5 * (dist_fwd + dist_bwd)
    else:
        dists = dist_fwd
    return dists, float(dists.mean())


def camera_descriptor(camera: Camera, direction_weight: float = 1.0) -> np.ndarray:
    """6-vector (translation, weighted unit view direction) used as the spatial
    embedding for chunk assignment and memory-bank retrieval."""
    return np.concatenate([camera.position, direction_weight * camera.pose.forward])


def descriptor_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
