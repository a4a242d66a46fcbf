"""Versioned binary checkpoints.

Layout (all integers little-endian)::

    bytes 0..7   magic "OSPLATCK"
    bytes 8..11  format version (u32), currently 1
    bytes 12..19 header length in bytes (u64)
    header       UTF-8 "key=value" lines (counts, config snapshot, names)
    arrays       raw little-endian array data, fixed order (see FORMATS.md)

Round trip is bit-exact: ``load(save(x)) == x`` and saving a loaded
checkpoint reproduces the file byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..anchors import AnchorGrid
from ..heads import Mlp, HeadParameters
from ..train import TrainConfig, TrainState
from . import FormatError, atomic_write
from .config import config_from_text, config_to_text

MAGIC = b"OSPLATCK"
VERSION = 1

_HEAD_NAMES = ("opacity", "color", "cov")
_MLP_SLOTS = ("w1", "b1", "w2", "b2")


@dataclass
class Checkpoint:
    grid: AnchorGrid
    heads: HeadParameters
    config: TrainConfig
    iteration: int
    n_objects: int
    semantic_vectors: np.ndarray | None = None
    names: dict[int, str] = field(default_factory=dict)

    @classmethod
    def from_state(
        cls, state: TrainState, config: TrainConfig,
        names: dict[int, str] | None = None,
    ) -> "Checkpoint":
        return cls(
            grid=state.grid,
            heads=state.heads,
            config=config,
            iteration=state.iteration,
            n_objects=state.n_objects,
            semantic_vectors=state.semantic_vectors,
            names=dict(names or {}),
        )


def _grid_arrays(grid: AnchorGrid) -> list[np.ndarray]:
    return [
        grid.centers, grid.scalings, grid.features,
        grid.offsets, grid.ids, grid.color_override,
    ]


def _head_arrays(heads: HeadParameters) -> list[np.ndarray]:
    return [
        getattr(getattr(heads, name), slot)
        for name in _HEAD_NAMES
        for slot in _MLP_SLOTS
    ]


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    grid, heads = ckpt.grid, ckpt.heads
    lines = [
        f"anchors={len(grid)}",
        f"k={grid.k}",
        f"feature_dim={grid.feature_dim}",
        f"hidden={heads.opacity.w1.shape[0]}",
        f"n_objects={ckpt.n_objects}",
        f"iteration={ckpt.iteration}",
        "voxel_size=" + format(grid.voxel_size, ".17g"),
        f"has_semantic_vectors={int(ckpt.semantic_vectors is not None)}",
    ]
    lines += [
        "config." + line
        for line in config_to_text(ckpt.config).strip().splitlines()
    ]
    lines += [f"name.{obj_id}={name}" for obj_id, name in sorted(ckpt.names.items())]
    header = ("\n".join(lines) + "\n").encode("utf-8")

    arrays = _grid_arrays(grid) + _head_arrays(heads)
    if ckpt.semantic_vectors is not None:
        arrays.append(ckpt.semantic_vectors)

    with atomic_write(path) as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for arr in arrays:
            if arr.dtype == np.int32:
                f.write(np.ascontiguousarray(arr, dtype="<i4").tobytes())
            else:
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _take(data: bytes, offset: int, dtype, shape) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape)) if shape else 1
    nbytes = count * np.dtype(dtype).itemsize
    if len(data) - offset < nbytes:
        raise FormatError(
            f"truncated checkpoint: need {nbytes} bytes at byte offset {offset}"
        )
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return arr.reshape(shape).astype(arr.dtype.newbyteorder("=")), offset + nbytes


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != MAGIC:
        raise FormatError(f"bad checkpoint magic at byte offset 0 (want {MAGIC!r})")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", data, 12)
    offset = 20
    if len(data) - offset < header_len:
        raise FormatError(f"truncated checkpoint header at byte offset {offset}")
    header = data[offset : offset + header_len].decode("utf-8")
    offset += header_len

    fields: dict[str, str] = {}
    config_lines: list[str] = []
    names: dict[int, str] = {}
    for line in header.splitlines():
        key, _, value = line.partition("=")
        if key.startswith("config."):
            config_lines.append(f"{key[len('config.'):]} = {value}")
        elif key.startswith("name."):
            names[int(key[len("name."):])] = value
        else:
            fields[key] = value
    try:
        a = int(fields["anchors"])
        k = int(fields["k"])
        d = int(fields["feature_dim"])
        hidden = int(fields["hidden"])
        n_objects = int(fields["n_objects"])
        iteration = int(fields["iteration"])
        voxel_size = float(fields["voxel_size"])
        has_sem = bool(int(fields["has_semantic_vectors"]))
    except KeyError as e:
        raise FormatError(f"checkpoint header lacks field {e.args[0]!r}") from e
    config = config_from_text("\n".join(config_lines))

    centers, offset = _take(data, offset, "<f8", (a, 3))
    scalings, offset = _take(data, offset, "<f8", (a, 3))
    features, offset = _take(data, offset, "<f8", (a, d))
    anchor_offsets, offset = _take(data, offset, "<f8", (a, k, 3))
    ids, offset = _take(data, offset, "<i4", (a,))
    color_override, offset = _take(data, offset, "<f8", (a, 3))
    grid = AnchorGrid(
        voxel_size=voxel_size, k=k,
        centers=centers, scalings=scalings, features=features,
        offsets=anchor_offsets, ids=ids.astype(np.int32),
        color_override=color_override,
    )

    d_in = d + 4
    mlps = {}
    for name, out_dim in (("opacity", k), ("color", 3 * k), ("cov", 7 * k)):
        w1, offset = _take(data, offset, "<f8", (hidden, d_in))
        b1, offset = _take(data, offset, "<f8", (hidden,))
        w2, offset = _take(data, offset, "<f8", (out_dim, hidden))
        b2, offset = _take(data, offset, "<f8", (out_dim,))
        mlps[name] = Mlp(w1=w1, b1=b1, w2=w2, b2=b2)
    heads = HeadParameters(
        opacity=mlps["opacity"], color=mlps["color"], cov=mlps["cov"],
        k=k, feature_dim=d,
    )

    semantic_vectors = None
    if has_sem:
        semantic_vectors, offset = _take(data, offset, "<f8", (a, n_objects + 1))
    if offset != len(data):
        raise FormatError(
            f"{len(data) - offset} unexpected trailing byte(s) at offset {offset}"
        )
    return Checkpoint(
        grid=grid, heads=heads, config=config, iteration=iteration,
        n_objects=n_objects, semantic_vectors=semantic_vectors, names=names,
    )
