"""Deterministic synthetic scene plus a generative-renderer oracle.

The oracle stands in for a learned view synthesizer so scheduling and
consistency behavior can be verified exactly:

  - Pixels whose surface point is visible from a conditioning camera copy the
    content that conditioning frame shows there (for ground-truth conditioning
    this is the true scene color; for generated conditioning it propagates the
    earlier pass's content, which is what makes shared anchor frames enforce
    cross-pass agreement).
  - Pixels whose exact point is hidden but whose spatial cell appears in some
    conditioning view take the true surface color: a region a conditioning
    frame shows is never re-hallucinated, only grazing detail is filled in.
  - Pixels in cells absent from every conditioning view get a hallucination
    color that is a pure digest of (scene seed, spatial cell, pinning-frame
    identity). The pinning frame is the frame of the pass -- conditioning or
    generated -- whose camera sits closest to the cell center, so two passes
    agree on a hidden cell if and only if they pin it with the same frame
    content.

Everything is a pure function of its arguments; identical requests produce
bit-identical frames.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import Camera, GeometryError, Intrinsics, camera_rays, project

BACKGROUND = np.array([20, 20, 20], dtype=np.uint8)
_HIT_EPS = 1e-9
_DEPTH_REL_TOL = 2e-2
_DEPTH_ABS_TOL = 1e-9


class OracleError(ValueError):
    """Raised for invalid oracle requests."""


@dataclass(frozen=True)
class Frame:
    """8-bit RGB image, row major."""

    width: int
    height: int
    rgb: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.uint8)
        if rgb.shape != (self.height, self.width, 3):
            raise OracleError(f"frame buffer shape {rgb.shape} does not match size")
        rgb.setflags(write=False)
        object.__setattr__(self, "rgb", rgb)


def frame_hash(frame: Frame) -> str:
    """Stable digest of a frame's pixels."""
    h = hashlib.blake2b(digest_size=16)
    h.update(struct.pack("<II", frame.width, frame.height))
    h.update(frame.rgb.tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class ConditioningFrame:
    camera: Camera
    frame: Frame
    content_hash: str = ""

    def __post_init__(self):
        intr = self.camera.intrinsics
        if (self.frame.width, self.frame.height) != (intr.width, intr.height):
            raise OracleError("conditioning frame size does not match camera intrinsics")
        if not self.content_hash:
            object.__setattr__(self, "content_hash", frame_hash(self.frame))


@dataclass(frozen=True)
class GenerationRequest:
    """One forward pass of the generative renderer contract."""

    conditioning: tuple[ConditioningFrame, ...]
    target_cameras: tuple[Camera, ...]
    ordered: bool = False
    seed: int = 0
    cfg_scale: float = 3.0

    def __post_init__(self):
        if not self.conditioning:
            raise OracleError("conditioning must be non-empty")
        if not self.target_cameras:
            raise OracleError("target_cameras must be non-empty")
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        object.__setattr__(self, "target_cameras", tuple(self.target_cameras))


@dataclass(frozen=True)
class SyntheticScene:
    """Colored spheres and triangles inside the [-1, 1]^3 working volume."""

    seed: int
    sphere_centers: np.ndarray  # (s, 3)
    sphere_radii: np.ndarray  # (s,)
    sphere_albedo: np.ndarray  # (s, 3) in [0, 1]
    tri_vertices: np.ndarray  # (t, 3, 3)
    tri_albedo: np.ndarray  # (t, 3) in [0, 1]
    cell_size: float = 0.25

    @property
    def primitive_count(self) -> int:
        return len(self.sphere_radii) + len(self.tri_albedo)

    @property
    def albedo(self) -> np.ndarray:
        """(n, 3) albedo indexed by primitive id (spheres first)."""
        return np.concatenate([self.sphere_albedo, self.tri_albedo], axis=0)


def build_scene(seed: int, cell_size: float = 0.25) -> SyntheticScene:
    """Deterministic scene from seed; identical seeds give identical scenes."""
    rng = np.random.default_rng(seed)
    n_spheres = int(rng.integers(15, 50))
    n_tris = int(rng.integers(15, 50))
    centers = rng.uniform(-0.75, 0.75, size=(n_spheres, 3))
    radii = rng.uniform(0.05, 0.2, size=n_spheres)
    sphere_albedo = rng.uniform(0.05, 1.0, size=(n_spheres, 3))
    base = rng.uniform(-0.8, 0.8, size=(n_tris, 1, 3))
    offsets = rng.uniform(-0.35, 0.35, size=(n_tris, 2, 3))
    verts = np.concatenate([base, base + offsets], axis=1)
    verts = np.clip(verts, -1.0, 1.0)
    tri_albedo = rng.uniform(0.05, 1.0, size=(n_tris, 3))
    return SyntheticScene(seed=seed, sphere_centers=centers, sphere_radii=radii,
                          sphere_albedo=sphere_albedo, tri_vertices=verts,
                          tri_albedo=tri_albedo, cell_size=cell_size)


def cast_rays(scene: SyntheticScene, origins: np.ndarray,
              directions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-hit query for unit-direction rays.

    origins: (n, 3) or (3,) broadcast; directions: (n, 3) unit vectors.
    Returns (t, prim_id) with t = +inf and prim_id = -1 for misses. Distances
    equal Euclidean distance from the origin because directions are unit.
    """
    dirs = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    orig = np.broadcast_to(np.asarray(origins, dtype=np.float64), dirs.shape)
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    best_id = np.full(n, -1, dtype=np.int64)

    if len(scene.sphere_radii):
        oc = orig[:, None, :] - scene.sphere_centers[None, :, :]  # (n, s, 3)
        b = np.einsum("nsk,nk->ns", oc, dirs)
        c0 = np.einsum("nsk,nsk->ns", oc, oc) - scene.sphere_radii[None, :] ** 2
        disc = b * b - c0
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t_near = -b - sq
        t_far = -b + sq
        t = np.where(t_near > _HIT_EPS, t_near, t_far)
        t = np.where(ok & (t > _HIT_EPS), t, np.inf)
        idx = np.argmin(t, axis=1)
        tmin = t[np.arange(n), idx]
        better = tmin < best_t
        best_t = np.where(better, tmin, best_t)
        best_id = np.where(better, idx, best_id)

    if len(scene.tri_albedo):
        v0 = scene.tri_vertices[:, 0]
        e1 = scene.tri_vertices[:, 1] - v0
        e2 = scene.tri_vertices[:, 2] - v0
        h = np.cross(dirs[:, None, :], e2[None, :, :])  # (n, t, 3)
        a = np.einsum("tk,ntk->nt", e1, h)
        parallel = np.abs(a) < 1e-12
        f = 1.0 / np.where(parallel, 1.0, a)
        s = orig[:, None, :] - v0[None, :, :]
        u = f * np.einsum("ntk,ntk->nt", s, h)
        q = np.cross(s, e1[None, :, :])
        v = f * np.einsum("ntk,ntk->nt", dirs[:, None, :], q)
        t = f * np.einsum("tk,ntk->nt", e2, q)
        ok = (~parallel) & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > _HIT_EPS)
        t = np.where(ok, t, np.inf)
        idx = np.argmin(t, axis=1)
        tmin = t[np.arange(n), idx]
        better = tmin < best_t
        best_t = np.where(better, tmin, best_t)
        best_id = np.where(better, idx + len(scene.sphere_radii), best_id)

    return best_t, best_id


def _pack_cells(cells: np.ndarray) -> np.ndarray:
    """Fold (..., 3) integer cell indices into unique scalar int64 keys.

    Components are offset to non-negative and masked to 21 bits each, so the
    packing is injective for any |index| < 2^20 (cells live in [-4, 4) here).
    """
    c = (cells.astype(np.int64) + (1 << 20)) & 0x1FFFFF
    return (c[..., 0] << 42) | (c[..., 1] << 21) | c[..., 2]


@dataclass(frozen=True)
class _GeometryBuffers:
    """First-hit geometry for every pixel of one camera."""

    depth: np.ndarray  # (h, w) Euclidean distance, +inf on miss
    prim: np.ndarray  # (h, w) primitive id, -1 on miss
    points: np.ndarray  # (h, w, 3) hit points (garbage on miss)

    def covered_cells(self, cell_size: float) -> np.ndarray:
        """Sorted packed keys of cells this view renders."""
        fg = self.prim >= 0
        if not fg.any():
            return np.empty(0, dtype=np.int64)
        cells = np.floor(self.points[fg] / cell_size).astype(np.int64)
        return np.unique(_pack_cells(cells))


def _geometry_buffers(scene: SyntheticScene, camera: Camera) -> _GeometryBuffers:
    origin, dirs = camera_rays(camera)
    h, w = dirs.shape[:2]
    t, prim = cast_rays(scene, origin, dirs.reshape(-1, 3))
    points = origin[None, :] + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs.reshape(-1, 3)
    return _GeometryBuffers(depth=t.reshape(h, w), prim=prim.reshape(h, w),
                            points=points.reshape(h, w, 3))


def render_ground_truth(scene: SyntheticScene, camera: Camera) -> Frame:
    """Flat-shaded nearest-hit render with the fixed background color."""
    buf = _geometry_buffers(scene, camera)
    colors = np.empty(buf.prim.shape + (3,), dtype=np.uint8)
    colors[:] = BACKGROUND
    fg = buf.prim >= 0
    albedo = scene.albedo
    colors[fg] = np.clip(np.rint(albedo[buf.prim[fg]] * 255.0), 0, 255).astype(np.uint8)
    return Frame(width=camera.intrinsics.width, height=camera.intrinsics.height, rgb=colors)


def _visible_from(camera: Camera, buffers: _GeometryBuffers,
                  points: np.ndarray, prim: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Which world points are visible from a camera, via its geometry buffers.

    A point passes if it projects in front of the camera, inside the image,
    onto a pixel whose first hit is the same primitive at a matching depth.
    Returns (visible mask, (pixel_row, pixel_col)) for the projected pixels.
    """
    intr = camera.intrinsics
    uv, z = project(camera, points)
    inside = (z > _HIT_EPS) & (uv[:, 0] >= 0.0) & (uv[:, 0] < intr.width) \
        & (uv[:, 1] >= 0.0) & (uv[:, 1] < intr.height)
    col = np.clip(np.floor(uv[:, 0]).astype(np.int64), 0, intr.width - 1)
    row = np.clip(np.floor(uv[:, 1]).astype(np.int64), 0, intr.height - 1)
    dist = np.linalg.norm(points - camera.position, axis=-1)
    buf_depth = buffers.depth[row, col]
    buf_prim = buffers.prim[row, col]
    depth_ok = np.abs(dist - buf_depth) <= _DEPTH_REL_TOL * buf_depth + _DEPTH_ABS_TOL
    visible = inside & (buf_prim == prim) & depth_ok
    return visible, (row, col)


def visibility_mask(scene: SyntheticScene, target: Camera,
                    conditioning_cameras: list[Camera]) -> np.ndarray:
    """Per-pixel flag: the target pixel's surface point is visible from at
    least one conditioning camera. Background pixels are False."""
    buf = _geometry_buffers(scene, target)
    h, w = buf.prim.shape
    out = np.zeros((h, w), dtype=bool)
    fg = buf.prim >= 0
    if not fg.any() or not conditioning_cameras:
        return out
    pts = buf.points[fg]
    prim = buf.prim[fg]
    vis_any = np.zeros(len(pts), dtype=bool)
    for cam in conditioning_cameras:
        cam_buf = _geometry_buffers(scene, cam)
        vis, _ = _visible_from(cam, cam_buf, pts, prim)
        vis_any |= vis
    out[fg] = vis_any
    return out


def _digest_rgb(scene_seed: int, cell: tuple[int, int, int], identity: str) -> np.ndarray:
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<q3q", scene_seed, *cell))
    h.update(identity.encode())
    return np.frombuffer(h.digest()[:3], dtype=np.uint8).copy()


def _generated_identity(scene_seed: int, request_seed: int, slot: int,
                        camera: Camera) -> str:
    h = hashlib.blake2b(digest_size=12)
    h.update(struct.pack("<qqq", scene_seed, request_seed, slot))
    h.update(camera.position.tobytes())
    h.update(camera.pose.forward.tobytes())
    return "g!" + h.hexdigest()


@dataclass(frozen=True)
class FrameMetadata:
    """Per-pixel provenance of one generated frame.

    cell_ids: (h, w, 3) integer cell index of the hit point, or the sentinel
    row (2**31, .) on background. hallucinated marks digest-colored pixels;
    source_index points into `identities` (the frame whose content or identity
    determined the pixel), -1 on background.
    """

    cell_ids: np.ndarray
    hallucinated: np.ndarray
    source_index: np.ndarray
    identities: tuple[str, ...]
    conditioning_count: int

    def cell_keys(self) -> np.ndarray:
        """(h, w) scalar keys for cells (packed int64)."""
        return _pack_cells(self.cell_ids)


_BG_CELL = np.array([2 ** 31, 2 ** 31, 2 ** 31], dtype=np.int64)


def oracle_generate(scene: SyntheticScene, request: GenerationRequest) -> list[Frame]:
    """Generate target frames for one forward pass. See the module docstring
    for the exact visibility / pinning semantics."""
    frames, _ = oracle_generate_detailed(scene, request)
    return frames


def oracle_generate_detailed(
        scene: SyntheticScene,
        request: GenerationRequest) -> tuple[list[Frame], list[FrameMetadata]]:
    """Like oracle_generate but also returns per-pixel provenance metadata."""
    cond = request.conditioning
    cond_buffers = [_geometry_buffers(scene, c.camera) for c in cond]
    cond_positions = np.stack([c.camera.position for c in cond])
    shown_cells = np.unique(np.concatenate(
        [b.covered_cells(scene.cell_size) for b in cond_buffers]))

    identities = [c.content_hash for c in cond]
    gen_positions = []
    for slot, cam in enumerate(request.target_cameras):
        identities.append(_generated_identity(scene.seed, request.seed, slot, cam))
        gen_positions.append(cam.position)
    candidate_positions = np.concatenate([cond_positions, np.stack(gen_positions)])
    identities = tuple(identities)

    albedo255 = np.clip(np.rint(scene.albedo * 255.0), 0, 255).astype(np.uint8)
    frames: list[Frame] = []
    metas: list[FrameMetadata] = []
    digest_cache: dict[tuple[int, int, int, int], np.ndarray] = {}

    for target in request.target_cameras:
        buf = _geometry_buffers(scene, target)
        h, w = buf.prim.shape
        rgb = np.empty((h, w, 3), dtype=np.uint8)
        rgb[:] = BACKGROUND
        cells = np.broadcast_to(_BG_CELL, (h, w, 3)).copy()
        halluc = np.zeros((h, w), dtype=bool)
        source = np.full((h, w), -1, dtype=np.int64)

        fg = buf.prim >= 0
        if fg.any():
            pts = buf.points[fg]
            prim = buf.prim[fg]
            n = len(pts)
            cells_fg = np.floor(pts / scene.cell_size).astype(np.int64)
            cells[fg] = cells_fg

            # Visible branch: copy from the conditioning frame that sees the
            # point along the best-aligned sightline (prim-verified, so
            # ground-truth conditioning reproduces the true color exactly,
            # and an identical camera always wins with alignment 1).
            ray_dir = pts - target.position
            ray_dir /= np.linalg.norm(ray_dir, axis=-1, keepdims=True)
            copy_score = np.full((n, len(cond)), np.inf)
            copy_color = np.zeros((n, len(cond), 3), dtype=np.uint8)
            for ci, (cframe, cbuf) in enumerate(zip(cond, cond_buffers)):
                vis, (row, col) = _visible_from(cframe.camera, cbuf, pts, prim)
                if vis.any():
                    sight = pts[vis] - cframe.camera.position
                    sight /= np.linalg.norm(sight, axis=-1, keepdims=True)
                    copy_score[vis, ci] = -np.einsum("nk,nk->n", sight, ray_dir[vis])
                    copy_color[vis, ci] = cframe.frame.rgb[row[vis], col[vis]]
            best_cond = np.argmin(copy_score, axis=1)
            visible_any = np.isfinite(copy_score[np.arange(n), best_cond])

            colors_fg = albedo255[prim]
            src_fg = np.full(n, -1, dtype=np.int64)
            if visible_any.any():
                rows = np.arange(n)[visible_any]
                colors_fg[visible_any] = copy_color[rows, best_cond[visible_any]]
                src_fg[visible_any] = best_cond[visible_any]

            # Grazing fallback: a point that fails the per-pixel visibility
            # test but lives in a cell some conditioning view renders keeps
            # the true surface color (already in colors_fg). Only cells
            # absent from every conditioning view are hallucinated.
            keys_fg = _pack_cells(cells_fg)
            shown = np.isin(keys_fg, shown_cells, assume_unique=False)
            hidden = ~visible_any & ~shown
            if hidden.any():
                centers = (cells_fg[hidden] + 0.5) * scene.cell_size
                d = np.linalg.norm(centers[:, None, :] - candidate_positions[None, :, :],
                                   axis=-1)
                pinner = np.argmin(d, axis=1)
                src_fg[hidden] = pinner
                hidden_cells = cells_fg[hidden]
                hidden_colors = np.empty((hidden.sum(), 3), dtype=np.uint8)
                for i, (cell, pin) in enumerate(zip(map(tuple, hidden_cells), pinner)):
                    key = (*cell, int(pin))
                    color = digest_cache.get(key)
                    if color is None:
                        color = _digest_rgb(scene.seed, cell, identities[pin])
                        digest_cache[key] = color
                    hidden_colors[i] = color
                colors_fg[hidden] = hidden_colors

            rgb[fg] = colors_fg
            halluc[fg] = hidden
            source[fg] = src_fg

        frames.append(Frame(width=w, height=h, rgb=rgb))
        metas.append(FrameMetadata(cell_ids=cells, hallucinated=halluc,
                                   source_index=source, identities=identities,
                                   conditioning_count=len(cond)))
    return frames, metas


def oracle_matches(scene: SyntheticScene, cam_a: Camera, cam_b: Camera,
                   max_matches: int = 256):
    """Exact pixel correspondences between two views from scene geometry.

    Points in image a are pixel centers; their partners in image b are the
    exact (sub-pixel) projections of the shared surface points. Only mutually
    visible points are kept; selection is a deterministic stride.
    """
    from .geometry import MatchSet

    buf_a = _geometry_buffers(scene, cam_a)
    fg = buf_a.prim >= 0
    if not fg.any():
        raise OracleError("no scene surface visible from the first camera")
    pts = buf_a.points[fg]
    prim = buf_a.prim[fg]
    buf_b = _geometry_buffers(scene, cam_b)
    vis, _ = _visible_from(cam_b, buf_b, pts, prim)
    if not vis.any():
        raise OracleError("no mutually visible surface between the cameras")
    rows, cols = np.nonzero(fg)
    pa = np.stack([cols + 0.5, rows + 0.5], axis=-1)[vis]
    uv, _ = project(cam_b, pts[vis])
    if len(pa) > max_matches:
        stride = len(pa) // max_matches + (1 if len(pa) % max_matches else 0)
        pa = pa[::stride]
        uv = uv[::stride]
    return MatchSet(points_a=pa, points_b=uv)
