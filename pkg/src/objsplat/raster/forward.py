"""Tile-based forward rasterization of projected splats.

Pixels composite contributors front to back (depth order, ties by primitive
index).  After compositing, the residual transmittance is added to semantic
channel 0 so the semantic sub-vector is a proper probability distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .projection import ProjectedSplats

BG_CHANNEL = 3  # channel layout: RGB (0..2), then semantics with background first
DEFAULT_TILE = 16
DEFAULT_ALPHA_MIN = 1.0 / 255.0
DEFAULT_T_MIN = 1e-4


class RasterConfigError(ValueError):
    pass


@dataclass
class RenderTarget:
    """Composited channel image plus the state needed for the backward pass."""

    channels: np.ndarray  # (H, W, C); semantic part background-augmented
    transmittance: np.ndarray  # (H, W) residual transmittance
    # saved compositing schedule
    splats: ProjectedSplats
    sorted_splats: np.ndarray
    tile_range: np.ndarray
    n_contrib: np.ndarray
    width: int
    height: int
    tile_size: int
    alpha_min: float
    t_min: float

    @property
    def rgb(self) -> np.ndarray:
        return self.channels[:, :, :3]

    @property
    def semantics(self) -> np.ndarray:
        return self.channels[:, :, 3:]


def conics_from_cov2d(cov2d: np.ndarray) -> np.ndarray:
    a, b, c = cov2d[:, 0], cov2d[:, 1], cov2d[:, 2]
    det = a * c - b * b
    return np.stack([c / det, -b / det, a / det], axis=1)


def _bin_splats(splats: ProjectedSplats, width, height, tile_size):
    n_tiles_x = (width + tile_size - 1) // tile_size
    n_tiles_y = (height + tile_size - 1) // tile_size
    n_tiles = n_tiles_x * n_tiles_y

    u, v = splats.means2d[:, 0], splats.means2d[:, 1]
    r = splats.radii
    tx0 = np.clip(np.floor((u - r) / tile_size), 0, n_tiles_x - 1).astype(np.int64)
    tx1 = np.clip(np.floor((u + r) / tile_size), 0, n_tiles_x - 1).astype(np.int64)
    ty0 = np.clip(np.floor((v - r) / tile_size), 0, n_tiles_y - 1).astype(np.int64)
    ty1 = np.clip(np.floor((v + r) / tile_size), 0, n_tiles_y - 1).astype(np.int64)

    counts = (tx1 - tx0 + 1) * (ty1 - ty0 + 1)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    total = int(offsets[-1])
    tile_ids = np.empty(total, dtype=np.int64)
    dup_splats = np.empty(total, dtype=np.int64)
    if total:
        kernels.fill_tile_lists(
            tx0, tx1, ty0, ty1, offsets[:-1], n_tiles_x, tile_ids, dup_splats
        )
    # canonical order: tile, then depth, then original primitive index
    order = np.lexsort(
        (splats.prim_index[dup_splats], splats.depths[dup_splats], tile_ids)
    )
    sorted_splats = dup_splats[order]
    per_tile = np.bincount(tile_ids, minlength=n_tiles)
    tile_range = np.concatenate([[0], np.cumsum(per_tile)]).astype(np.int64)
    return sorted_splats, tile_range, n_tiles_x


def rasterize_forward(
    splats: ProjectedSplats,
    width: int,
    height: int,
    tile_size: int = DEFAULT_TILE,
    alpha_min: float = DEFAULT_ALPHA_MIN,
    t_min: float = DEFAULT_T_MIN,
) -> RenderTarget:
    n_channels = splats.channels.shape[1]
    if n_channels < 4:
        raise RasterConfigError(
            "channel vectors need RGB plus at least the background class"
        )
    if not np.isfinite(splats.means2d).all() or not np.isfinite(splats.channels).all():
        raise RasterConfigError("non-finite splat attributes")

    sorted_splats, tile_range, n_tiles_x = _bin_splats(
        splats, width, height, tile_size
    )
    out = np.zeros((height, width, n_channels))
    final_t = np.ones((height, width))
    n_contrib = np.zeros((height, width), dtype=np.int64)
    if len(splats):
        kernels.tile_forward(
            splats.means2d,
            conics_from_cov2d(splats.cov2d),
            splats.opacities,
            splats.channels,
            sorted_splats,
            tile_range,
            n_tiles_x,
            tile_size,
            width,
            height,
            alpha_min,
            t_min,
            out,
            final_t,
            n_contrib,
        )
    out[:, :, BG_CHANNEL] += final_t
    return RenderTarget(
        channels=out,
        transmittance=final_t,
        splats=splats,
        sorted_splats=sorted_splats,
        tile_range=tile_range,
        n_contrib=n_contrib,
        width=width,
        height=height,
        tile_size=tile_size,
        alpha_min=alpha_min,
        t_min=t_min,
    )


def argmax_id(target: RenderTarget) -> np.ndarray:
    """Predicted object ID per pixel; ties break to the smallest index."""
    return target.semantics.argmax(axis=2).astype(np.int32)
