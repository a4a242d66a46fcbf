"""Reverse-mode gradients of the tile compositing formula."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .forward import BG_CHANNEL, RenderTarget, conics_from_cov2d


class RasterStateError(RuntimeError):
    pass


@dataclass
class SplatGrads:
    """Gradients aligned with the ProjectedSplats arrays."""

    means2d: np.ndarray  # (M, 2)
    cov2d: np.ndarray  # (M, 3) packed like ProjectedSplats.cov2d
    opacities: np.ndarray  # (M,)
    channels: np.ndarray  # (M, C)


def rasterize_backward(target: RenderTarget, grad_channels: np.ndarray) -> SplatGrads:
    if target.sorted_splats is None or target.n_contrib is None:
        raise RasterStateError("render target has no saved compositing state")
    if grad_channels.shape != target.channels.shape:
        raise RasterStateError(
            f"gradient shape {grad_channels.shape} does not match render "
            f"target {target.channels.shape}"
        )
    splats = target.splats
    m = len(splats)
    n_channels = splats.channels.shape[1]
    d_means2d = np.zeros((m, 2))
    d_conics = np.zeros((m, 3))
    d_opacities = np.zeros(m)
    d_channels = np.zeros((m, n_channels))
    if m:
        conics = conics_from_cov2d(splats.cov2d)
        n_tiles_x = (target.width + target.tile_size - 1) // target.tile_size
        kernels.tile_backward(
            splats.means2d,
            conics,
            splats.opacities,
            splats.channels,
            target.sorted_splats,
            target.tile_range,
            n_tiles_x,
            target.tile_size,
            target.width,
            target.height,
            target.alpha_min,
            target.transmittance,
            target.n_contrib,
            np.ascontiguousarray(grad_channels, dtype=np.float64),
            BG_CHANNEL,
            d_means2d,
            d_conics,
            d_opacities,
            d_channels,
        )
        d_cov2d = _conic_grad_to_cov2d(d_conics, conics)
    else:
        d_cov2d = np.zeros((m, 3))
    return SplatGrads(
        means2d=d_means2d,
        cov2d=d_cov2d,
        opacities=d_opacities,
        channels=d_channels,
    )


def _conic_grad_to_cov2d(d_conics: np.ndarray, conics: np.ndarray) -> np.ndarray:
    """Chain packed conic gradients through the 2x2 matrix inverse."""
    K = np.empty((len(conics), 2, 2))
    K[:, 0, 0] = conics[:, 0]
    K[:, 0, 1] = conics[:, 1]
    K[:, 1, 0] = conics[:, 1]
    K[:, 1, 1] = conics[:, 2]
    G = np.empty_like(K)
    G[:, 0, 0] = d_conics[:, 0]
    G[:, 0, 1] = 0.5 * d_conics[:, 1]
    G[:, 1, 0] = 0.5 * d_conics[:, 1]
    G[:, 1, 1] = d_conics[:, 2]
    M = -np.einsum("mij,mjk,mkl->mil", K, G, K)
    return np.stack([M[:, 0, 0], 2.0 * M[:, 0, 1], M[:, 1, 1]], axis=1)
