import numpy as np
import pytest

from objsplat.raster.projection import ProjectedSplats
from objsplat.scene import Camera


def make_camera(
    width: int = 32,
    height: int = 32,
    f: float = 40.0,
    z: float = 3.0,
) -> Camera:
    """Identity-rotation camera at (0, 0, -z) looking along +z."""
    return Camera(
        fx=f, fy=f, cx=(width - 1) / 2, cy=(height - 1) / 2,
        width=width, height=height,
        qvec=np.array([1.0, 0.0, 0.0, 0.0]),
        tvec=np.array([0.0, 0.0, z]),
    )


def random_projected_splats(
    rng: np.random.Generator, n: int, width: int, height: int
) -> ProjectedSplats:
    """Random well-conditioned screen-space splats with 7 channels
    (RGB + 4 semantic classes)."""
    lo = [min(2, width - 1), min(2, height - 1)]
    hi = [max(width - 3, lo[0] + 1e-9), max(height - 3, lo[1] + 1e-9)]
    means2d = rng.uniform(lo, hi, size=(n, 2))
    a = rng.uniform(1.5, 8.0, n)
    c = rng.uniform(1.5, 8.0, n)
    b = rng.uniform(-0.6, 0.6, n) * np.sqrt(a * c)
    cov2d = np.stack([a, b, c], axis=1)
    radii = np.ceil(3 * np.sqrt(np.maximum(a, c))).astype(np.int64)
    channels = rng.uniform(0.0, 1.0, size=(n, 7))
    return ProjectedSplats(
        means2d=means2d,
        cov2d=cov2d,
        depths=rng.uniform(1.0, 10.0, n),
        radii=radii,
        opacities=rng.uniform(0.2, 0.9, n),
        channels=channels,
        prim_index=np.arange(n),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
