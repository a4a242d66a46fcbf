"""Voxelized anchor grid: initialization from a labeled cloud, and the
ID-preserving grow/prune lifecycle.

Anchors are stored struct-of-arrays; every mutation returns a fresh grid
plus the row mapping the trainer needs to remap optimizer state.  Growth
only replicates existing object IDs; pruning removes an anchor outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import LabeledPointCloud

DEFAULT_FEATURE_DIM = 32
DEFAULT_K = 10


def halton_offsets(k: int) -> np.ndarray:
    """Fixed low-discrepancy pattern of k points in [-0.5, 0.5]^3."""

    def halton(i: int, base: int) -> float:
        f, r = 1.0, 0.0
        while i > 0:
            f /= base
            r += f * (i % base)
            i //= base
        return r

    pts = np.array(
        [[halton(i + 1, b) for b in (2, 3, 5)] for i in range(k)]
    )
    return pts - 0.5


def voxel_key(position: np.ndarray, voxel_size: float) -> tuple[int, int, int]:
    i = np.floor(position / voxel_size).astype(np.int64)
    return int(i[0]), int(i[1]), int(i[2])


@dataclass
class AnchorGrid:
    voxel_size: float
    k: int
    centers: np.ndarray  # (A, 3) voxel centers
    scalings: np.ndarray  # (A, 3) positive
    features: np.ndarray  # (A, D)
    offsets: np.ndarray  # (A, k, 3)
    ids: np.ndarray  # (A,) int32, immutable per anchor
    # recolor overrides (scene editing): NaN rows mean "no override"
    color_override: np.ndarray = None  # type: ignore[assignment]
    voxels: dict = field(default_factory=dict)  # voxel key -> row

    def __post_init__(self):
        if self.color_override is None:
            self.color_override = np.full((len(self.centers), 3), np.nan)
        if not self.voxels:
            self.voxels = {
                voxel_key(c, self.voxel_size): i
                for i, c in enumerate(self.centers)
            }

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def select(self, rows: np.ndarray) -> "AnchorGrid":
        rows = np.asarray(rows)
        return AnchorGrid(
            voxel_size=self.voxel_size,
            k=self.k,
            centers=self.centers[rows].copy(),
            scalings=self.scalings[rows].copy(),
            features=self.features[rows].copy(),
            offsets=self.offsets[rows].copy(),
            ids=self.ids[rows].copy(),
            color_override=self.color_override[rows].copy(),
            voxels={},
        )


class InitializationError(ValueError):
    pass


def voxelize_init(
    cloud: LabeledPointCloud,
    voxel_size: float,
    k: int = DEFAULT_K,
    feature_dim: int = DEFAULT_FEATURE_DIM,
) -> AnchorGrid:
    """One anchor per occupied voxel; its ID is the majority ID of the
    voxel's points (ties to the smallest ID)."""
    if voxel_size <= 0:
        raise InitializationError("voxel_size must be positive")
    if len(cloud) == 0:
        raise InitializationError("cannot initialize anchors from an empty cloud")
    cells = np.floor(cloud.positions / voxel_size).astype(np.int64)
    n_ids = int(cloud.ids.max()) + 1
    votes: dict[tuple[int, int, int], np.ndarray] = {}
    for cell, obj_id in zip(map(tuple, cells), cloud.ids):
        counts = votes.get(cell)
        if counts is None:
            counts = np.zeros(n_ids, dtype=np.int64)
            votes[cell] = counts
        counts[obj_id] += 1
    keys = sorted(votes)
    centers = (np.array(keys, dtype=np.float64) + 0.5) * voxel_size
    ids = np.array([int(votes[key].argmax()) for key in keys], dtype=np.int32)
    a = len(keys)
    return AnchorGrid(
        voxel_size=voxel_size,
        k=k,
        centers=centers,
        scalings=np.full((a, 3), voxel_size),
        features=np.zeros((a, feature_dim)),
        offsets=np.tile(halton_offsets(k)[None], (a, 1, 1)),
        ids=ids,
        voxels={key: i for i, key in enumerate(keys)},
    )


@dataclass
class GrowPruneStats:
    """Accumulators over a training window, reset after each grow/prune."""

    grad_accum: np.ndarray  # (A,) summed screen-space gradient magnitudes
    grad_count: np.ndarray  # (A,) primitives contributing to grad_accum
    opacity_accum: np.ndarray  # (A,) summed decoded opacities
    obs_count: np.ndarray  # (A,) opacity observations
    window: int = 100

    @classmethod
    def zeros(cls, n_anchors: int, window: int = 100) -> "GrowPruneStats":
        return cls(
            grad_accum=np.zeros(n_anchors),
            grad_count=np.zeros(n_anchors),
            opacity_accum=np.zeros(n_anchors),
            obs_count=np.zeros(n_anchors),
            window=window,
        )

    def reset(self):
        self.grad_accum[:] = 0
        self.grad_count[:] = 0
        self.opacity_accum[:] = 0
        self.obs_count[:] = 0

    def mean_grad(self) -> np.ndarray:
        return self.grad_accum / np.maximum(self.grad_count, 1)

    def mean_opacity(self) -> np.ndarray:
        return self.opacity_accum / np.maximum(self.obs_count, 1)


def grow_anchors(
    grid: AnchorGrid,
    stats: GrowPruneStats,
    grad_threshold: float,
    copy_features: bool = False,
) -> tuple[AnchorGrid, np.ndarray]:
    """Spawn anchors in empty voxels at the offset positions of anchors whose
    averaged positional gradient exceeds the threshold.

    Returns the new grid and, for each appended anchor, its parent row.
    Existing anchors (and their voxels) are never touched.
    """
    hot = np.flatnonzero(stats.mean_grad() > grad_threshold)
    new_centers, new_ids, new_feats, parents = [], [], [], []
    occupied = dict(grid.voxels)
    for row in hot:
        candidates = grid.centers[row] + grid.offsets[row] * grid.scalings[row]
        for cand in candidates:
            key = voxel_key(cand, grid.voxel_size)
            if key in occupied:
                continue
            occupied[key] = len(grid) + len(new_centers)
            new_centers.append((np.array(key) + 0.5) * grid.voxel_size)
            new_ids.append(grid.ids[row])
            new_feats.append(
                grid.features[row].copy()
                if copy_features
                else np.zeros(grid.feature_dim)
            )
            parents.append(row)
    if not new_centers:
        return grid, np.empty(0, dtype=np.int64)
    n_new = len(new_centers)
    new_grid = AnchorGrid(
        voxel_size=grid.voxel_size,
        k=grid.k,
        centers=np.vstack([grid.centers, new_centers]),
        scalings=np.vstack([grid.scalings, np.full((n_new, 3), grid.voxel_size)]),
        features=np.vstack([grid.features, new_feats]),
        offsets=np.concatenate(
            [grid.offsets, np.tile(halton_offsets(grid.k)[None], (n_new, 1, 1))]
        ),
        ids=np.concatenate([grid.ids, np.array(new_ids, dtype=np.int32)]),
        color_override=np.vstack([grid.color_override, np.full((n_new, 3), np.nan)]),
        voxels=occupied,
    )
    return new_grid, np.asarray(parents, dtype=np.int64)


def prune_anchors(
    grid: AnchorGrid,
    stats: GrowPruneStats,
    opacity_threshold: float,
) -> tuple[AnchorGrid, np.ndarray]:
    """Drop anchors whose observed mean opacity fell below the threshold.

    Anchors never observed during the window are kept.  Returns the new grid
    and the surviving row indices.
    """
    mean_op = stats.mean_opacity()
    keep = (stats.obs_count == 0) | (mean_op >= opacity_threshold)
    rows = np.flatnonzero(keep)
    if len(rows) == len(grid):
        return grid, rows
    return grid.select(rows), rows
