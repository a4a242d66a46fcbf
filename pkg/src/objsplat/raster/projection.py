"""EWA projection of 3D Gaussians to screen space, forward and backward.

All functions are vectorized over primitives with float64 arrays; the
backward pass returns exact reverse-mode gradients of the forward formulas
(depth and culling decisions carry no gradient).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene import Camera, quat_to_rotmat

MIN_DEPTH = 0.01
LOW_PASS = 0.3  # pixel^2 dilation added to every projected covariance


class InvalidRotationError(ValueError):
    pass


def quats_to_rotmats(q: np.ndarray) -> np.ndarray:
    """Batch of rotation matrices from unit quaternions (M, 4) -> (M, 3, 3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((len(q), 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - z * w)
    R[:, 0, 2] = 2 * (x * z + y * w)
    R[:, 1, 0] = 2 * (x * y + z * w)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - x * w)
    R[:, 2, 0] = 2 * (x * z - y * w)
    R[:, 2, 1] = 2 * (y * z + x * w)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def rotmat_grad_to_quat(dR: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Chain dL/dR -> dL/dq for the quat_to_rotmat parameterization."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    g = np.empty_like(q)
    g[:, 0] = 2 * (
        -z * dR[:, 0, 1] + y * dR[:, 0, 2]
        + z * dR[:, 1, 0] - x * dR[:, 1, 2]
        - y * dR[:, 2, 0] + x * dR[:, 2, 1]
    )
    g[:, 1] = 2 * (
        y * dR[:, 0, 1] + z * dR[:, 0, 2]
        + y * dR[:, 1, 0] - 2 * x * dR[:, 1, 1] - w * dR[:, 1, 2]
        + z * dR[:, 2, 0] + w * dR[:, 2, 1] - 2 * x * dR[:, 2, 2]
    )
    g[:, 2] = 2 * (
        -2 * y * dR[:, 0, 0] + x * dR[:, 0, 1] + w * dR[:, 0, 2]
        + x * dR[:, 1, 0] + z * dR[:, 1, 2]
        - w * dR[:, 2, 0] + z * dR[:, 2, 1] - 2 * y * dR[:, 2, 2]
    )
    g[:, 3] = 2 * (
        -2 * z * dR[:, 0, 0] - w * dR[:, 0, 1] + x * dR[:, 0, 2]
        + w * dR[:, 1, 0] - 2 * z * dR[:, 1, 1] + y * dR[:, 1, 2]
        + x * dR[:, 2, 0] + y * dR[:, 2, 1]
    )
    return g


def compute_cov3d(s: np.ndarray, q: np.ndarray) -> np.ndarray:
    """World-space covariance R diag(s)^2 R^T of a single Gaussian."""
    s = np.asarray(s, dtype=np.float64).reshape(3)
    q = np.asarray(q, dtype=np.float64).reshape(4)
    if (s <= 0).any():
        raise ValueError("scale components must be positive")
    if abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise InvalidRotationError("quaternion must have unit norm (tol 1e-6)")
    R = quat_to_rotmat(q)
    M = R * s
    return M @ M.T


def compute_cov3d_batch(scales: np.ndarray, quats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched covariances; also returns the factor M = R diag(s) for backward."""
    R = quats_to_rotmats(quats)
    M = R * scales[:, None, :]
    return M @ np.transpose(M, (0, 2, 1)), M


def compute_cov3d_backward(
    dcov3d: np.ndarray, scales: np.ndarray, quats: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (dscale, dquat) from dL/dcov3d (assumed symmetric)."""
    R = quats_to_rotmats(quats)
    M = R * scales[:, None, :]
    G = 0.5 * (dcov3d + np.transpose(dcov3d, (0, 2, 1)))
    dM = 2.0 * G @ M
    dscale = np.einsum("mij,mij->mj", dM, R)
    dR = dM * scales[:, None, :]
    dquat = rotmat_grad_to_quat(dR, quats)
    return dscale, dquat


@dataclass
class ProjectedSplats:
    """Screen-space splats, struct-of-arrays over the surviving primitives."""

    means2d: np.ndarray  # (M, 2) pixels
    cov2d: np.ndarray  # (M, 3) packed (a, b, c) of [[a, b], [b, c]]
    depths: np.ndarray  # (M,) camera-space z
    radii: np.ndarray  # (M,) 3-sigma pixel radius
    opacities: np.ndarray  # (M,)
    channels: np.ndarray  # (M, C)
    prim_index: np.ndarray  # (M,) index into the pre-cull primitive arrays

    def __len__(self) -> int:
        return len(self.means2d)


def project_gaussians(
    means: np.ndarray,
    cov3d: np.ndarray,
    opacities: np.ndarray,
    channels: np.ndarray,
    camera: Camera,
) -> ProjectedSplats:
    """Project all primitives, culling those behind the near plane or whose
    3-sigma footprint misses the image."""
    W = camera.rotation
    pc = means @ W.T + camera.tvec
    z = pc[:, 2]
    front = z >= MIN_DEPTH
    zs = np.where(front, z, 1.0)
    u = camera.fx * pc[:, 0] / zs + camera.cx
    v = camera.fy * pc[:, 1] / zs + camera.cy

    J = np.zeros((len(means), 2, 3))
    J[:, 0, 0] = camera.fx / zs
    J[:, 0, 2] = -camera.fx * pc[:, 0] / zs**2
    J[:, 1, 1] = camera.fy / zs
    J[:, 1, 2] = -camera.fy * pc[:, 1] / zs**2

    V = np.einsum("ij,mjk,lk->mil", W, cov3d, W)
    S = np.einsum("mij,mjk,mlk->mil", J, V, J)
    a = S[:, 0, 0] + LOW_PASS
    b = S[:, 0, 1]
    c = S[:, 1, 1] + LOW_PASS

    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(np.maximum(mid**2 - (a * c - b * b), 1e-12))
    radii = np.ceil(3.0 * np.sqrt(lam_max))

    on_image = (
        (u + radii >= 0)
        & (u - radii <= camera.width - 1)
        & (v + radii >= 0)
        & (v - radii <= camera.height - 1)
    )
    keep = front & on_image
    idx = np.flatnonzero(keep)
    return ProjectedSplats(
        means2d=np.stack([u[idx], v[idx]], axis=1),
        cov2d=np.stack([a[idx], b[idx], c[idx]], axis=1),
        depths=z[idx],
        radii=radii[idx],
        opacities=np.asarray(opacities, dtype=np.float64)[idx],
        channels=np.asarray(channels, dtype=np.float64)[idx],
        prim_index=idx.astype(np.int64),
    )


def splat_channels(colors: np.ndarray, object_ids: np.ndarray, n_objects: int) -> np.ndarray:
    """Per-primitive channel vectors: RGB first, then the one-hot ID encoding
    (background at semantic index 0), total width 3 + n_objects + 1."""
    m = len(colors)
    channels = np.zeros((m, 3 + n_objects + 1))
    channels[:, :3] = colors
    channels[np.arange(m), 3 + np.asarray(object_ids, dtype=np.int64)] = 1.0
    return channels


def project_gaussian(primitive, camera: Camera, n_objects: int):
    """Single-primitive convenience wrapper; None when culled."""
    cov3d, _ = compute_cov3d_batch(
        primitive.scale[None, :], primitive.quat[None, :]
    )
    channels = splat_channels(
        primitive.color[None, :], np.array([primitive.object_id]), n_objects
    )
    splats = project_gaussians(
        primitive.mean[None, :], cov3d, np.array([primitive.opacity]), channels, camera
    )
    if len(splats) == 0:
        return None
    return splats


def project_gaussians_backward(
    means: np.ndarray,
    cov3d: np.ndarray,
    camera: Camera,
    prim_index: np.ndarray,
    dmeans2d: np.ndarray,
    dcov2d: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Scatter splat gradients back to (dmeans3d, dcov3d) over all primitives.

    ``dcov2d`` is packed (da, db, dc) matching ProjectedSplats.cov2d; culled
    primitives receive zeros.
    """
    W = camera.rotation
    mu = means[prim_index]
    pc = mu @ W.T + camera.tvec
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    fx, fy = camera.fx, camera.fy

    J = np.zeros((len(mu), 2, 3))
    J[:, 0, 0] = fx / z
    J[:, 0, 2] = -fx * x / z**2
    J[:, 1, 1] = fy / z
    J[:, 1, 2] = -fy * y / z**2
    V = np.einsum("ij,mjk,lk->mil", W, cov3d[prim_index], W)

    # dL/dSigma2d as a symmetric 2x2 (off-diagonal split between both slots)
    G2 = np.empty((len(mu), 2, 2))
    G2[:, 0, 0] = dcov2d[:, 0]
    G2[:, 0, 1] = 0.5 * dcov2d[:, 1]
    G2[:, 1, 0] = 0.5 * dcov2d[:, 1]
    G2[:, 1, 1] = dcov2d[:, 2]

    dV = np.einsum("mji,mjk,mkl->mil", J, G2, J)
    dcov3d_sel = np.einsum("ji,mjk,kl->mil", W, dV, W)
    dJ = 2.0 * np.einsum("mij,mjk,mkl->mil", G2, J, V)

    # contract dJ with the partials of J w.r.t. camera-space position
    dpc = np.zeros_like(pc)
    dpc[:, 0] += dJ[:, 0, 2] * (-fx / z**2)
    dpc[:, 1] += dJ[:, 1, 2] * (-fy / z**2)
    dpc[:, 2] += (
        dJ[:, 0, 0] * (-fx / z**2)
        + dJ[:, 0, 2] * (2 * fx * x / z**3)
        + dJ[:, 1, 1] * (-fy / z**2)
        + dJ[:, 1, 2] * (2 * fy * y / z**3)
    )
    # pinhole mean projection
    dpc[:, 0] += dmeans2d[:, 0] * fx / z
    dpc[:, 1] += dmeans2d[:, 1] * fy / z
    dpc[:, 2] += (
        dmeans2d[:, 0] * (-fx * x / z**2) + dmeans2d[:, 1] * (-fy * y / z**2)
    )

    dmeans = np.zeros_like(means)
    dcov3d = np.zeros_like(cov3d)
    dmeans[prim_index] = dpc @ W
    dcov3d[prim_index] = dcov3d_sel
    return dmeans, dcov3d
