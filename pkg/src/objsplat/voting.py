"""Lift per-view 2D object-ID maps onto the 3D point cloud.

Three strategies: majority voting over re-projections, probability-weighted
voting (seeded, deterministic), and correspondence voting that reads labels at
known track pixels instead of re-projecting.  Points that collect no votes
keep the background ID 0.  Ties always break toward the smallest ID.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .prng import SplitMix64, substream_seed
from .scene import Camera, IdMap, LabeledPointCloud

_MIN_DEPTH = 1e-6


class VotingConfigError(ValueError):
    pass


class TrackDataError(ValueError):
    pass


@dataclass
class TrackCorrespondences:
    """Per-point (view index, pixel x, pixel y) observations from SfM tracks."""

    # one (T_i, 3) int32 array per point; may be empty
    tracks: list[np.ndarray]

    def __post_init__(self):
        self.tracks = [
            np.asarray(t, dtype=np.int32).reshape(-1, 3) for t in self.tracks
        ]

    def __len__(self) -> int:
        return len(self.tracks)


def project_point(p: np.ndarray, camera: Camera) -> Optional[tuple[int, int]]:
    """Round-to-nearest pixel of the pinhole projection, or None when the
    point sits behind the camera or lands outside the image."""
    pix, valid = project_points(np.asarray(p, dtype=np.float64).reshape(1, 3), camera)
    if not valid[0]:
        return None
    return int(pix[0, 0]), int(pix[0, 1])


def project_points(points: np.ndarray, camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection; returns integer pixels (N, 2) and a validity mask."""
    pc = points @ camera.rotation.T + camera.tvec
    z = pc[:, 2]
    in_front = z > _MIN_DEPTH
    zs = np.where(in_front, z, 1.0)
    u = camera.fx * pc[:, 0] / zs + camera.cx
    v = camera.fy * pc[:, 1] / zs + camera.cy
    px = np.rint(u).astype(np.int64)
    py = np.rint(v).astype(np.int64)
    valid = (
        in_front
        & (px >= 0)
        & (px < camera.width)
        & (py >= 0)
        & (py < camera.height)
    )
    pix = np.stack([px, py], axis=1)
    pix[~valid] = 0
    return pix, valid


def infer_n_objects(id_maps: Sequence[IdMap]) -> int:
    return max((int(m.ids.max()) for m in id_maps), default=0)


def gather_vote_counts(
    cloud: LabeledPointCloud,
    id_maps: Sequence[IdMap],
    cameras: Sequence[Camera],
    n_objects: int | None = None,
) -> np.ndarray:
    """Per-point vote counts, shape (N, n_objects + 1)."""
    if len(id_maps) != len(cameras):
        raise VotingConfigError(
            f"{len(id_maps)} ID maps vs {len(cameras)} cameras"
        )
    for m, c in zip(id_maps, cameras):
        if (m.width, m.height) != (c.width, c.height):
            raise VotingConfigError("ID map resolution does not match its camera")
    if n_objects is None:
        n_objects = infer_n_objects(id_maps)
    counts = np.zeros((len(cloud), n_objects + 1), dtype=np.int64)
    for id_map, camera in zip(id_maps, cameras):
        pix, valid = project_points(cloud.positions, camera)
        labels = id_map.ids[pix[valid, 1], pix[valid, 0]]
        rows = np.flatnonzero(valid)
        np.add.at(counts, (rows, labels), 1)
    return counts


def gather_votes(
    cloud: LabeledPointCloud,
    id_maps: Sequence[IdMap],
    cameras: Sequence[Camera],
    n_objects: int | None = None,
) -> list[dict[int, int]]:
    """Per-point tallies {object_id: votes}; omits zero-count entries."""
    counts = gather_vote_counts(cloud, id_maps, cameras, n_objects)
    return [
        {int(i): int(c) for i, c in enumerate(row) if c > 0} for row in counts
    ]


def majority_vote(tally: Mapping[int, int]) -> int:
    """ID with the highest count; empty tally gives 0, ties give smallest ID."""
    best_id, best_count = 0, 0
    for obj_id in sorted(tally):
        if tally[obj_id] > best_count:
            best_id, best_count = obj_id, tally[obj_id]
    return best_id


def probability_vote(tally: Mapping[int, int], seed: int) -> int:
    """ID drawn from the tally's empirical distribution with a splitmix64
    stream; (tally, seed) fully determines the result."""
    total = sum(tally.values())
    if total == 0:
        return 0
    u = SplitMix64(seed).next_float() * total
    acc = 0
    for obj_id in sorted(tally):
        acc += tally[obj_id]
        if u < acc:
            return obj_id
    return max(tally)


def _majority_from_counts(counts: np.ndarray) -> np.ndarray:
    # argmax picks the first (= smallest) index on ties; all-zero rows give 0
    return counts.argmax(axis=1).astype(np.int32)


def correspondence_vote(
    cloud: LabeledPointCloud,
    tracks: TrackCorrespondences,
    id_maps: Sequence[IdMap],
) -> np.ndarray:
    """Majority over labels read at track pixels; trackless points get 0."""
    if len(tracks) != len(cloud):
        raise VotingConfigError(
            f"{len(tracks)} tracks for {len(cloud)} points"
        )
    n_objects = infer_n_objects(id_maps)
    out = np.zeros(len(cloud), dtype=np.int32)
    for i, obs in enumerate(tracks.tracks):
        if len(obs) == 0:
            continue
        counts = np.zeros(n_objects + 1, dtype=np.int64)
        for view, px, py in obs:
            if not 0 <= view < len(id_maps):
                raise TrackDataError(f"point {i}: view index {view} out of range")
            id_map = id_maps[view]
            if not (0 <= px < id_map.width and 0 <= py < id_map.height):
                raise TrackDataError(
                    f"point {i}: pixel ({px}, {py}) outside view {view}"
                )
            counts[id_map.ids[py, px]] += 1
        out[i] = counts.argmax()
    return out


def assign_ids(
    cloud: LabeledPointCloud,
    strategy: str,
    id_maps: Sequence[IdMap],
    cameras: Sequence[Camera] | None = None,
    tracks: TrackCorrespondences | None = None,
    seed: int = 0,
    n_objects: int | None = None,
) -> LabeledPointCloud:
    """Return a new cloud with identical geometry/color and voted IDs."""
    if strategy == "correspondence":
        if tracks is None:
            raise VotingConfigError("correspondence voting requires tracks")
        new_ids = correspondence_vote(cloud, tracks, id_maps)
    elif strategy in ("majority", "probability"):
        if cameras is None:
            raise VotingConfigError(f"{strategy} voting requires cameras")
        counts = gather_vote_counts(cloud, id_maps, cameras, n_objects)
        if strategy == "majority":
            new_ids = _majority_from_counts(counts)
        else:
            new_ids = np.zeros(len(cloud), dtype=np.int32)
            for i, row in enumerate(counts):
                tally = {int(j): int(c) for j, c in enumerate(row) if c > 0}
                new_ids[i] = probability_vote(tally, substream_seed(seed, i))
    else:
        raise VotingConfigError(f"unknown voting strategy {strategy!r}")
    return cloud.with_ids(new_ids)
