"""Glue between anchors, projection and the rasterizer: full per-view forward
and backward passes for both semantic modes.

In ``onehot`` mode, semantic channels carry the fixed ID encodings and never
receive gradients; in ``learnable`` mode they carry per-anchor learnable
vectors that do.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorGrid
from .heads import DecodedPrimitives, DecodeGrads, HeadParameters, decode_anchors, decode_backward
from .raster.backward import SplatGrads, rasterize_backward
from .raster.forward import RenderTarget, rasterize_forward
from .raster.projection import (
    ProjectedSplats,
    compute_cov3d_backward,
    compute_cov3d_batch,
    project_gaussians,
    project_gaussians_backward,
    splat_channels,
)
from .scene import Camera


@dataclass
class RenderContext:
    grid: AnchorGrid
    heads: HeadParameters
    camera: Camera
    n_objects: int
    decoded: DecodedPrimitives
    cov3d: np.ndarray  # (A*k, 3, 3)
    splats: ProjectedSplats
    target: RenderTarget
    semantic_mode: str


def render_view(
    grid: AnchorGrid,
    heads: HeadParameters,
    camera: Camera,
    n_objects: int,
    semantic_mode: str = "onehot",
    semantic_vectors: np.ndarray | None = None,
    **raster_opts,
) -> RenderContext:
    decoded = decode_anchors(grid, heads, camera)
    a, k = decoded.n_anchors, decoded.k
    means = decoded.flat(decoded.means)
    scales = decoded.flat(decoded.scales)
    quats = decoded.flat(decoded.quats)
    cov3d, _ = compute_cov3d_batch(scales, quats)

    if semantic_mode == "onehot":
        channels = splat_channels(
            decoded.flat(decoded.colors),
            np.repeat(decoded.object_ids, k),
            n_objects,
        )
    elif semantic_mode == "learnable":
        if semantic_vectors is None:
            raise ValueError("learnable mode requires per-anchor semantic vectors")
        channels = np.zeros((a * k, 3 + n_objects + 1))
        channels[:, :3] = decoded.flat(decoded.colors)
        channels[:, 3:] = np.repeat(semantic_vectors, k, axis=0)
    else:
        raise ValueError(f"unknown semantic mode {semantic_mode!r}")

    splats = project_gaussians(
        means, cov3d, decoded.flat(decoded.opacities), channels, camera
    )
    target = rasterize_forward(splats, camera.width, camera.height, **raster_opts)
    return RenderContext(
        grid=grid,
        heads=heads,
        camera=camera,
        n_objects=n_objects,
        decoded=decoded,
        cov3d=cov3d,
        splats=splats,
        target=target,
        semantic_mode=semantic_mode,
    )


@dataclass
class ViewGrads:
    decode: DecodeGrads
    semantic_vectors: np.ndarray | None  # (A, n+1) in learnable mode
    splats: SplatGrads
    anchor_screen_grad: np.ndarray  # (A,) summed 2D positional gradient norms
    anchor_screen_count: np.ndarray  # (A,) projected primitives per anchor


def render_backward(
    ctx: RenderContext,
    grad_channels: np.ndarray,
    extra_d_scales: np.ndarray | None = None,
    extra_d_opacities: np.ndarray | None = None,
) -> ViewGrads:
    """Full-pipeline reverse pass from an image-space gradient.

    ``extra_d_scales``/``extra_d_opacities`` (flat (A*k, ...) arrays) let the
    trainer inject regularizer gradients that act on decoded attributes
    directly (e.g. volume regularization).
    """
    decoded, splats = ctx.decoded, ctx.splats
    a, k = decoded.n_anchors, decoded.k
    m_all = a * k

    sg = rasterize_backward(ctx.target, grad_channels)
    idx = splats.prim_index

    d_colors = np.zeros((m_all, 3))
    d_colors[idx] = sg.channels[:, :3]
    d_opac = np.zeros(m_all)
    d_opac[idx] = sg.opacities
    if extra_d_opacities is not None:
        d_opac = d_opac + extra_d_opacities

    d_sem_vec = None
    if ctx.semantic_mode == "learnable":
        d_sem_flat = np.zeros((m_all, ctx.n_objects + 1))
        d_sem_flat[idx] = sg.channels[:, 3:]
        d_sem_vec = d_sem_flat.reshape(a, k, -1).sum(axis=1)
    # onehot mode: semantic channel gradients exist but the encodings are
    # constants, so they are dropped here.

    means = decoded.flat(decoded.means)
    d_means, d_cov3d = project_gaussians_backward(
        means, ctx.cov3d, ctx.camera, idx, sg.means2d, sg.cov2d
    )
    d_scales, d_quats = compute_cov3d_backward(
        d_cov3d, decoded.flat(decoded.scales), decoded.flat(decoded.quats)
    )
    if extra_d_scales is not None:
        d_scales = d_scales + extra_d_scales

    decode_grads = decode_backward(
        ctx.grid,
        ctx.heads,
        decoded,
        d_means.reshape(a, k, 3),
        d_opac.reshape(a, k),
        d_colors.reshape(a, k, 3),
        d_scales.reshape(a, k, 3),
        d_quats.reshape(a, k, 4),
    )

    # densification statistic: screen-space positional gradient magnitude,
    # rescaled to half-image units so thresholds are resolution independent
    norms = np.linalg.norm(sg.means2d, axis=1) * (ctx.camera.width / 2.0)
    screen = np.zeros(a)
    count = np.zeros(a)
    anchor_of = idx // k
    np.add.at(screen, anchor_of, norms)
    np.add.at(count, anchor_of, 1)
    return ViewGrads(
        decode=decode_grads,
        semantic_vectors=d_sem_vec,
        splats=sg,
        anchor_screen_grad=screen,
        anchor_screen_count=count,
    )
