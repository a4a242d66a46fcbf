"""The optimization loop tying everything together: per-view rendering,
loss evaluation, backpropagation, Adam updates, and periodic anchor
grow/prune with ID replication."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anchors import AnchorGrid, GrowPruneStats, grow_anchors, prune_anchors, voxelize_init
from .heads import HeadParameters
from .losses import (
    LossWeights,
    l1_loss,
    l1_loss_backward,
    learnable_semantic_loss,
    semantic_ce_loss,
    ssim_loss_backward,
    total_loss,
    volume_reg,
    volume_reg_backward,
)
from .optim import Adam, exp_decay
from .pipeline import render_backward, render_view
from .scene import Camera, IdMap, LabeledPointCloud


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    iterations: int = 2000
    voxel_size: float = 0.08
    k: int = 10
    feature_dim: int = 32
    semantic_mode: str = "onehot"  # onehot | learnable
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    # per-group learning rates
    lr_offsets: float = 1e-2
    lr_offsets_final: float = 1e-4
    lr_features: float = 2.5e-3
    lr_heads: float = 2e-3
    lr_heads_final: float = 2e-4
    lr_semantic_vec: float = 2.5e-3
    # grow/prune schedule
    grow_start: int = 500
    grow_end: int = 15000
    grow_interval: int = 100
    grad_threshold: float = 2e-4
    prune_opacity: float = 5e-3
    copy_features_on_grow: bool = False

    def validate(self):
        if self.k < 1 or self.iterations < 1:
            raise ValueError("k and iterations must be at least 1")
        if self.semantic_mode not in ("onehot", "learnable"):
            raise ValueError(f"unknown semantic mode {self.semantic_mode!r}")


@dataclass
class TrainDataset:
    cameras: list[Camera]
    images: list[np.ndarray]  # (H, W, 3) in [0, 1]
    id_maps: list[IdMap]
    cloud: LabeledPointCloud
    n_objects: int

    def validate(self):
        if not (len(self.cameras) == len(self.images) == len(self.id_maps)):
            raise ValueError("cameras, images and ID maps must align")
        if len(self.cameras) == 0:
            raise ValueError("dataset needs at least one view")


@dataclass
class TrainState:
    grid: AnchorGrid
    heads: HeadParameters
    optimizer: Adam
    stats: GrowPruneStats
    iteration: int = 0
    semantic_vectors: np.ndarray | None = None  # (A, n+1), learnable mode only
    n_objects: int = 0

    _ANCHOR_SLOTS = ("features", "offsets", "semantic_vectors")

    def _remap(self, rows: np.ndarray, n_total: int):
        for name in self._ANCHOR_SLOTS:
            self.optimizer.remap_rows(name, rows, n_total)
        if self.semantic_vectors is not None:
            new = np.zeros((n_total, self.semantic_vectors.shape[1]))
            new[: len(rows)] = self.semantic_vectors[rows]
            self.semantic_vectors = new


LOG_FIELDS = ("iteration", "l1", "ssim", "vol", "semantic", "total")


def init_state(config: TrainConfig, dataset: TrainDataset) -> TrainState:
    cloud = dataset.cloud
    if config.weights.semantic == 0.0:
        # A zero semantic weight reduces the objective to reconstruction
        # only: object identity is not lifted onto the anchors, so every
        # anchor keeps the background ID and renders as unclassified.
        cloud = cloud.with_ids(np.zeros(len(cloud), dtype=np.int32))
    grid = voxelize_init(
        cloud, config.voxel_size, k=config.k, feature_dim=config.feature_dim
    )
    heads = HeadParameters.init(config.feature_dim, config.k, seed=config.seed)
    state = TrainState(
        grid=grid,
        heads=heads,
        optimizer=Adam(),
        stats=GrowPruneStats.zeros(len(grid), window=config.grow_interval),
        n_objects=dataset.n_objects,
    )
    if config.semantic_mode == "learnable":
        state.semantic_vectors = np.zeros((len(grid), dataset.n_objects + 1))
    return state


def train_step(
    state: TrainState, config: TrainConfig, dataset: TrainDataset, view: int
) -> dict[str, float]:
    """One optimization step on the given view; returns the loss log row."""
    t = state.iteration + 1
    camera = dataset.cameras[view]
    ctx = render_view(
        state.grid,
        state.heads,
        camera,
        dataset.n_objects,
        semantic_mode=config.semantic_mode,
        semantic_vectors=state.semantic_vectors,
    )
    target = ctx.target
    gt_rgb = dataset.images[view]
    gt_ids = dataset.id_maps[view]

    l1 = l1_loss(target.rgb, gt_rgb)
    ssim_val, ssim_grad = ssim_loss_backward(target.rgb, gt_rgb)

    scales_flat = ctx.decoded.flat(ctx.decoded.scales)
    visible_scales = scales_flat[ctx.splats.prim_index]
    vol = volume_reg(visible_scales)
    d_scales_flat = np.zeros_like(scales_flat)
    d_scales_flat[ctx.splats.prim_index] = (
        config.weights.vol * volume_reg_backward(visible_scales)
    )

    grad_channels = np.zeros_like(target.channels)
    grad_channels[:, :, :3] = (
        l1_loss_backward(target.rgb, gt_rgb) + config.weights.ssim * ssim_grad
    )
    if config.semantic_mode == "onehot":
        sem, sem_grad = semantic_ce_loss(target, gt_ids)
        grad_channels += config.weights.semantic * sem_grad
    else:
        sem, sem_grad = learnable_semantic_loss(target.semantics, gt_ids)
        grad_channels[:, :, 3:] += config.weights.semantic * sem_grad

    loss = total_loss(l1, ssim_val, vol, sem, config.weights)
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss at iteration {t}")

    vgrads = render_backward(ctx, grad_channels, extra_d_scales=d_scales_flat)

    opt = state.optimizer
    lr_off = exp_decay(config.lr_offsets, config.lr_offsets_final, t, config.iterations)
    lr_heads = exp_decay(config.lr_heads, config.lr_heads_final, t, config.iterations)
    opt.step("features", state.grid.features, vgrads.decode.features, config.lr_features, t)
    opt.step("offsets", state.grid.offsets, vgrads.decode.offsets, lr_off, t)
    for head_name in ("opacity", "color", "cov"):
        g_mlp = getattr(vgrads.decode.heads, head_name)
        p_mlp = getattr(state.heads, head_name)
        for slot in ("w1", "b1", "w2", "b2"):
            opt.step(
                f"heads.{head_name}.{slot}",
                getattr(p_mlp, slot),
                getattr(g_mlp, slot),
                lr_heads,
                t,
            )
    if config.semantic_mode == "learnable":
        opt.step(
            "semantic_vectors",
            state.semantic_vectors,
            vgrads.semantic_vectors,
            config.lr_semantic_vec,
            t,
        )

    state.stats.grad_accum += vgrads.anchor_screen_grad
    state.stats.grad_count += vgrads.anchor_screen_count
    state.stats.opacity_accum += ctx.decoded.opacities.mean(axis=1)
    state.stats.obs_count += 1

    state.iteration = t
    if (
        config.grow_start <= t <= config.grow_end
        and t % config.grow_interval == 0
    ):
        _grow_and_prune(state, config)

    return {
        "iteration": t,
        "l1": l1,
        "ssim": ssim_val,
        "vol": vol,
        "semantic": sem,
        "total": loss,
    }


def _grow_and_prune(state: TrainState, config: TrainConfig):
    old_n = len(state.grid)
    grid, _parents = grow_anchors(
        state.grid,
        state.stats,
        config.grad_threshold,
        copy_features=config.copy_features_on_grow,
    )
    if len(grid) != old_n:
        state.grid = grid
        state._remap(np.arange(old_n), len(grid))
    # new anchors have no observations yet, so pruning keeps them
    stats = GrowPruneStats.zeros(len(state.grid), window=config.grow_interval)
    stats.opacity_accum[:old_n] = state.stats.opacity_accum
    stats.obs_count[:old_n] = state.stats.obs_count
    grown_n = len(state.grid)
    grid, kept = prune_anchors(state.grid, stats, config.prune_opacity)
    if len(grid) != grown_n:
        state.grid = grid
        state._remap(kept, len(grid))
    state.stats = GrowPruneStats.zeros(len(state.grid), window=config.grow_interval)


def train(
    config: TrainConfig, dataset: TrainDataset, log_callback=None
) -> tuple[TrainState, list[dict[str, float]]]:
    """Run the full loop; views are visited round-robin."""
    config.validate()
    dataset.validate()
    state = init_state(config, dataset)
    log: list[dict[str, float]] = []
    n_views = len(dataset.cameras)
    for i in range(config.iterations):
        row = train_step(state, config, dataset, view=i % n_views)
        log.append(row)
        if log_callback is not None:
            log_callback(row)
    return state, log
