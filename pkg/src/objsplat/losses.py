"""Training objectives: L1 and SSIM appearance terms, volume regularization,
the classification-based semantic loss, the learnable-semantics ablation
baseline, and their exact gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .raster.forward import RenderTarget
from .scene import IdMap

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
CE_PROB_FLOOR = 1e-6


class NumericalLossError(ValueError):
    pass


@dataclass
class LossWeights:
    ssim: float = 0.2
    vol: float = 2e-5
    semantic: float = 0.1


def l1_loss(rendered: np.ndarray, gt: np.ndarray) -> float:
    if rendered.shape != gt.shape:
        raise ValueError(f"shape mismatch {rendered.shape} vs {gt.shape}")
    return float(np.mean(np.abs(rendered - gt)))


def l1_loss_backward(rendered: np.ndarray, gt: np.ndarray) -> np.ndarray:
    if rendered.shape != gt.shape:
        raise ValueError(f"shape mismatch {rendered.shape} vs {gt.shape}")
    return np.sign(rendered - gt) / rendered.size


def _ssim_kernel() -> np.ndarray:
    half = SSIM_WINDOW // 2
    g = np.exp(-np.arange(-half, half + 1) ** 2 / (2 * SSIM_SIGMA**2))
    g /= g.sum()
    return np.outer(g, g)


_KERNEL = _ssim_kernel()


def _check_ssim_shapes(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM"
        )
    return a, b


def _ssim_maps(x: np.ndarray, y: np.ndarray):
    """Per-channel SSIM statistics on valid (fully covered) windows."""
    w = _KERNEL

    def f(img):
        return convolve2d(img, w, mode="valid")

    mu_x, mu_y = f(x), f(y)
    sx = f(x * x) - mu_x**2
    sy = f(y * y) - mu_y**2
    sxy = f(x * y) - mu_x * mu_y
    a1 = 2 * mu_x * mu_y + SSIM_C1
    a2 = 2 * sxy + SSIM_C2
    b1 = mu_x**2 + mu_y**2 + SSIM_C1
    b2 = sx + sy + SSIM_C2
    s = (a1 * a2) / (b1 * b2)
    return s, (mu_x, mu_y, sx, sy, sxy, a1, a2, b1, b2)


def ssim(rendered: np.ndarray, gt: np.ndarray) -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5), channel-averaged."""
    x, y = _check_ssim_shapes(rendered, gt)
    vals = [_ssim_maps(x[:, :, c], y[:, :, c])[0].mean() for c in range(x.shape[2])]
    return float(np.mean(vals))


def ssim_loss(rendered: np.ndarray, gt: np.ndarray) -> float:
    return 1.0 - ssim(rendered, gt)


def ssim_loss_backward(rendered: np.ndarray, gt: np.ndarray) -> tuple[float, np.ndarray]:
    """Returns (loss, dloss/drendered)."""
    x3, y3 = _check_ssim_shapes(rendered, gt)
    w = _KERNEL
    n_ch = x3.shape[2]
    grad = np.zeros_like(x3)
    total = 0.0
    for c in range(n_ch):
        x, y = x3[:, :, c], y3[:, :, c]
        s, (mu_x, mu_y, sx, sy, sxy, a1, a2, b1, b2) = _ssim_maps(x, y)
        total += s.mean()
        # loss = 1 - mean over channels of mean(s)
        u = -np.ones_like(s) / (s.size * n_ch)
        ga1 = u * a2 / (b1 * b2)
        ga2 = u * a1 / (b1 * b2)
        gb1 = -u * s / b1
        gb2 = -u * s / b2
        gsx = gb2
        gsxy = 2 * ga2
        gmu_x = 2 * mu_y * ga1 + 2 * mu_x * gb1 - 2 * mu_x * gsx - mu_y * gsxy
        grad[:, :, c] = (
            convolve2d(gmu_x, w, mode="full")
            + 2 * x * convolve2d(gsx, w, mode="full")
            + y * convolve2d(gsxy, w, mode="full")
        )
    loss = 1.0 - total / n_ch
    return float(loss), grad.reshape(rendered.shape)


def volume_reg(scales: np.ndarray) -> float:
    """Mean product of the three scale components; empty input gives 0."""
    if len(scales) == 0:
        return 0.0
    return float(np.prod(scales, axis=1).mean())


def volume_reg_backward(scales: np.ndarray) -> np.ndarray:
    if len(scales) == 0:
        return np.zeros_like(scales)
    grad = np.empty_like(scales)
    grad[:, 0] = scales[:, 1] * scales[:, 2]
    grad[:, 1] = scales[:, 0] * scales[:, 2]
    grad[:, 2] = scales[:, 0] * scales[:, 1]
    return grad / len(scales)


class SemanticDataError(ValueError):
    pass


def semantic_ce_loss(
    target: RenderTarget, gt: IdMap
) -> tuple[float, np.ndarray]:
    """Per-pixel cross entropy against the ground-truth ID map.

    Returns (loss, gradient w.r.t. the full channel image); the gradient only
    touches the semantic channels and is zero where the probability floor is
    active.
    """
    probs = target.semantics
    n_classes = probs.shape[2]
    ids = gt.ids
    if ids.shape != probs.shape[:2]:
        raise SemanticDataError(
            f"ID map {ids.shape} does not match render {probs.shape[:2]}"
        )
    if ids.max() >= n_classes:
        raise SemanticDataError(
            f"ground-truth ID {int(ids.max())} exceeds {n_classes - 1}"
        )
    rows, cols = np.indices(ids.shape)
    p = probs[rows, cols, ids]
    clamped = p < CE_PROB_FLOOR
    p_safe = np.maximum(p, CE_PROB_FLOOR)
    loss = float(np.mean(-np.log(p_safe)))
    grad = np.zeros_like(target.channels)
    g = np.where(clamped, 0.0, -1.0 / p_safe) / ids.size
    grad[rows, cols, 3 + ids] = g
    return loss, grad


def learnable_semantic_loss(
    semantics: np.ndarray, gt: IdMap
) -> tuple[float, np.ndarray]:
    """Ablation baseline: mean L1 between composited semantic channels and
    the one-hot ground-truth image.  Returns (loss, grad w.r.t. semantics)."""
    n_classes = semantics.shape[2]
    if gt.ids.max() >= n_classes:
        raise SemanticDataError(
            f"ground-truth ID {int(gt.ids.max())} exceeds {n_classes - 1}"
        )
    onehot = np.zeros_like(semantics)
    rows, cols = np.indices(gt.ids.shape)
    onehot[rows, cols, gt.ids] = 1.0
    loss = float(np.mean(np.abs(semantics - onehot)))
    grad = np.sign(semantics - onehot) / semantics.size
    return loss, grad


def total_loss(
    l1: float, ssim_val: float, vol: float, semantic: float, weights: LossWeights
) -> float:
    parts = {"l1": l1, "ssim": ssim_val, "vol": vol, "semantic": semantic}
    for name, value in parts.items():
        if not np.isfinite(value):
            raise NumericalLossError(f"non-finite loss component: {name}")
    return l1 + weights.ssim * ssim_val + weights.vol * vol + weights.semantic * semantic
