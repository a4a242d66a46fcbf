"""Naive per-pixel full-scan rasterizer used as a testing oracle.

Shares no binning or kernel code with the tile path: every pixel evaluates
every splat in globally sorted order.  Intended for small images only.
"""

from __future__ import annotations

import numpy as np

from .forward import BG_CHANNEL, DEFAULT_ALPHA_MIN, DEFAULT_T_MIN
from .projection import ProjectedSplats


def rasterize_reference(
    splats: ProjectedSplats,
    width: int,
    height: int,
    alpha_min: float = DEFAULT_ALPHA_MIN,
    t_min: float = DEFAULT_T_MIN,
) -> tuple[np.ndarray, np.ndarray]:
    """Returns (channel image with background augmentation, transmittance)."""
    n_channels = splats.channels.shape[1]
    out = np.zeros((height, width, n_channels))
    final_t = np.ones((height, width))
    order = np.lexsort((splats.prim_index, splats.depths))
    a = splats.cov2d[order, 0]
    b = splats.cov2d[order, 1]
    c = splats.cov2d[order, 2]
    det = a * c - b * b
    ca, cb, cc = c / det, -b / det, a / det
    mx = splats.means2d[order, 0]
    my = splats.means2d[order, 1]
    opac = splats.opacities[order]
    chans = splats.channels[order]
    for py in range(height):
        for px in range(width):
            dx = px - mx
            dy = py - my
            power = -0.5 * (ca * dx * dx + cc * dy * dy) - cb * dx * dy
            alpha = np.minimum(opac * np.exp(np.minimum(power, 0.0)), 0.99)
            alpha[power > 0.0] = 0.0
            alpha[alpha < alpha_min] = 0.0
            t_before = np.concatenate([[1.0], np.cumprod(1.0 - alpha)[:-1]])
            include = t_before >= t_min
            w = np.where(include, alpha * t_before, 0.0)
            out[py, px] = w @ chans
            if include.all():
                final_t[py, px] = t_before[-1] * (1.0 - alpha[-1])
            else:
                last = int(np.argmin(include))  # first excluded contributor
                final_t[py, px] = t_before[last]
    out[:, :, BG_CHANNEL] += final_t
    return out, final_t
