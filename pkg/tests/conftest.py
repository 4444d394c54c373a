import numpy as np
import pytest

from vcam.geometry import Camera, Intrinsics, Pose, look_at_pose
from scipy.spatial.transform import Rotation


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=int(rng.integers(0, 2 ** 31))).as_matrix()


def random_pose(rng: np.random.Generator, span: float = 3.0) -> Pose:
    return Pose(random_rotation(rng), rng.uniform(-span, span, size=3))


def default_intrinsics(width: int = 32, height: int = 32) -> Intrinsics:
    return Intrinsics(fx=float(width), fy=float(width), cx=width / 2.0,
                      cy=height / 2.0, width=width, height=height)


def random_camera(rng: np.random.Generator, span: float = 3.0,
                  intrinsics: Intrinsics | None = None) -> Camera:
    return Camera(random_pose(rng, span), intrinsics or default_intrinsics())


def orbit_cameras(n: int, radius: float = 2.0, elevation: float = 0.3,
                  loops: float = 1.0, intrinsics: Intrinsics | None = None,
                  center=(0.0, 0.0, 0.0)) -> list[Camera]:
    """Closed look-at orbit; frame i sits at azimuth 2*pi*loops*i/n.

    The azimuth is reduced modulo the full circle before evaluating, so with
    integer loops revisited frames get bit-identical cameras.
    """
    intr = intrinsics or default_intrinsics()
    center = np.asarray(center, dtype=np.float64)
    cams = []
    for i in range(n):
        az = 2.0 * np.pi * ((i * loops) % n) / n
        ring = radius * np.cos(elevation)
        eye = center + np.array([ring * np.cos(az), ring * np.sin(az),
                                 radius * np.sin(elevation)])
        cams.append(Camera(look_at_pose(eye, center), intr))
    return cams


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
