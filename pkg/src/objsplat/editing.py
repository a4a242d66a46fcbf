"""Object-level model surgery: query a single object as a sub-model, merge
sub-models back together, remove an object's anchors, or recolor an object.

Anchors carry their object ID directly, so every operation is a row
selection or per-row override; untouched anchors stay bit-identical.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .io.checkpoint import Checkpoint


class UnknownObjectError(KeyError):
    pass


def available_ids(ckpt: Checkpoint) -> list[int]:
    return sorted(int(i) for i in np.unique(ckpt.grid.ids))


def resolve_object(ckpt: Checkpoint, ident) -> int:
    """Map an object ID or exact name to an ID present in the checkpoint."""
    ids = available_ids(ckpt)
    if isinstance(ident, str) and not ident.lstrip("-").isdigit():
        matches = [i for i, n in ckpt.names.items() if n == ident]
        if not matches:
            raise UnknownObjectError(
                f"unknown object name {ident!r}; known names: "
                f"{sorted(ckpt.names.values())}"
            )
        obj_id = matches[0]
    else:
        obj_id = int(ident)
    if obj_id not in ids:
        raise UnknownObjectError(
            f"no anchors with object ID {obj_id}; available IDs: {ids}"
        )
    return obj_id


def _subset(ckpt: Checkpoint, rows: np.ndarray) -> Checkpoint:
    sem = None
    if ckpt.semantic_vectors is not None:
        sem = ckpt.semantic_vectors[rows].copy()
    return replace(
        ckpt,
        grid=ckpt.grid.select(rows),
        semantic_vectors=sem,
        names=dict(ckpt.names),
    )


def query_object(ckpt: Checkpoint, ident) -> Checkpoint:
    """Sub-model containing exactly the queried object's anchors."""
    obj_id = resolve_object(ckpt, ident)
    return _subset(ckpt, np.flatnonzero(ckpt.grid.ids == obj_id))


def edit_remove(ckpt: Checkpoint, ident) -> Checkpoint:
    """Delete all anchors carrying the object's ID."""
    obj_id = resolve_object(ckpt, ident)
    return _subset(ckpt, np.flatnonzero(ckpt.grid.ids != obj_id))


def edit_recolor(ckpt: Checkpoint, ident, rgb) -> Checkpoint:
    """Override the color-head output with a fixed RGB for the object's
    anchors; semantic channels are untouched."""
    obj_id = resolve_object(ckpt, ident)
    rgb = np.asarray(rgb, dtype=np.float64).reshape(3)
    if (rgb < 0).any() or (rgb > 1).any():
        raise ValueError("recolor RGB must lie in [0, 1]")
    out = _subset(ckpt, np.arange(len(ckpt.grid)))
    out.grid.color_override[out.grid.ids == obj_id] = rgb
    return out


def merge_models(ckpts: list[Checkpoint]) -> Checkpoint:
    """Concatenate the anchor sets of compatible sub-models.

    All inputs must share voxel size, k, feature dimension and head
    parameters (merging is meant for sub-models split off one model).
    """
    if not ckpts:
        raise ValueError("merge_models needs at least one checkpoint")
    first = ckpts[0]
    for other in ckpts[1:]:
        same = (
            other.grid.voxel_size == first.grid.voxel_size
            and other.grid.k == first.grid.k
            and other.grid.feature_dim == first.grid.feature_dim
            and all(
                np.array_equal(a, b)
                for a, b in zip(other.heads.params(), first.heads.params())
            )
        )
        if not same:
            raise ValueError("checkpoints are not mergeable (mismatched model)")
    grid = first.grid
    merged = replace(
        first,
        grid=type(grid)(
            voxel_size=grid.voxel_size,
            k=grid.k,
            centers=np.vstack([c.grid.centers for c in ckpts]),
            scalings=np.vstack([c.grid.scalings for c in ckpts]),
            features=np.vstack([c.grid.features for c in ckpts]),
            offsets=np.concatenate([c.grid.offsets for c in ckpts]),
            ids=np.concatenate([c.grid.ids for c in ckpts]),
            color_override=np.vstack([c.grid.color_override for c in ckpts]),
        ),
        semantic_vectors=(
            np.vstack([c.semantic_vectors for c in ckpts])
            if first.semantic_vectors is not None
            else None
        ),
        names={k: v for c in ckpts for k, v in c.names.items()},
    )
    return merged
