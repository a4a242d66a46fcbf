"""Core scene types shared by every stage: labeled points, cameras, ID maps,
one-hot ID encodings, and Gaussian primitives.

Object IDs are integers 0..n_objects where 0 is the background / unclassified
class.  The one-hot encoding therefore has length n_objects + 1 with the
background slot at index 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidIdError(ValueError):
    pass


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def normalize_quat(q: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        raise ValueError("degenerate quaternion (near-zero norm)")
    return q / n


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LabeledPointCloud:
    """3D points with RGB color in [0, 1] and a per-point object ID."""

    positions: np.ndarray  # (N, 3) float64, meters
    colors: np.ndarray  # (N, 3) float64 in [0, 1]
    ids: np.ndarray  # (N,) int32

    def __post_init__(self):
        pos = _freeze(np.asarray(self.positions, dtype=np.float64).reshape(-1, 3))
        col = _freeze(np.asarray(self.colors, dtype=np.float64).reshape(-1, 3))
        ids = _freeze(np.asarray(self.ids, dtype=np.int32).reshape(-1))
        if not (len(pos) == len(col) == len(ids)):
            raise ValueError("positions, colors and ids must have equal length")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.positions)

    def with_ids(self, ids: np.ndarray) -> "LabeledPointCloud":
        return LabeledPointCloud(self.positions, self.colors, ids)


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with a world-to-camera rigid transform.

    ``qvec`` is a unit quaternion (w, x, y, z); a world point p maps to
    camera space as R(qvec) @ p + tvec, with +z looking forward.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    qvec: np.ndarray  # (4,)
    tvec: np.ndarray  # (3,)

    def __post_init__(self):
        q = _freeze(np.asarray(self.qvec, dtype=np.float64).reshape(4))
        t = _freeze(np.asarray(self.tvec, dtype=np.float64).reshape(3))
        object.__setattr__(self, "qvec", q)
        object.__setattr__(self, "tvec", t)
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValueError("camera quaternion must have unit norm (tol 1e-6)")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("resolution must be at least 1x1")

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_rotmat(self.qvec)

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.tvec


@dataclass(frozen=True)
class IdMap:
    """Per-pixel object ID image."""

    ids: np.ndarray  # (H, W) int32

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int32)
        if ids.ndim != 2:
            raise ValueError("IdMap expects a 2D array")
        if (ids < 0).any():
            raise ValueError("object IDs must be non-negative")
        object.__setattr__(self, "ids", _freeze(ids))

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def height(self) -> int:
        return self.ids.shape[0]


@dataclass(frozen=True)
class GaussianPrimitive:
    """A single renderable Gaussian decoded from an anchor."""

    mean: np.ndarray  # (3,) meters
    scale: np.ndarray  # (3,) positive
    quat: np.ndarray  # (4,) unit, (w, x, y, z)
    opacity: float  # [0, 1]
    color: np.ndarray  # (3,) in [0, 1]
    object_id: int

    def __post_init__(self):
        object.__setattr__(self, "mean", _freeze(np.asarray(self.mean, dtype=np.float64).reshape(3)))
        object.__setattr__(self, "scale", _freeze(np.asarray(self.scale, dtype=np.float64).reshape(3)))
        object.__setattr__(self, "quat", _freeze(np.asarray(self.quat, dtype=np.float64).reshape(4)))
        object.__setattr__(self, "color", _freeze(np.asarray(self.color, dtype=np.float64).reshape(3)))
        if not (0.0 <= self.opacity <= 1.0):
            raise ValueError("opacity must lie in [0, 1]")
        if (self.scale <= 0).any():
            raise ValueError("scale components must be positive")
        if abs(np.linalg.norm(self.quat) - 1.0) > 1e-6:
            raise ValueError("quaternion must have unit norm (tol 1e-6)")


def one_hot_encode(object_id: int, n_objects: int) -> np.ndarray:
    """Fixed ID encoding: length n_objects + 1 with a single 1 at object_id.

    Index 0 is the background class for unclassified pixels.
    """
    if not (0 <= object_id <= n_objects):
        raise InvalidIdError(
            f"object_id {object_id} outside [0, {n_objects}]"
        )
    e = np.zeros(n_objects + 1)
    e[object_id] = 1.0
    return e


@dataclass
class ValidationReport:
    n_bad_ids: int = 0
    n_nonfinite: int = 0
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.n_bad_ids == 0 and self.n_nonfinite == 0


def validate_cloud(cloud: LabeledPointCloud, n_objects: int) -> ValidationReport:
    """Report (without raising) ID-range and finiteness violations."""
    report = ValidationReport()
    bad = (cloud.ids < 0) | (cloud.ids > n_objects)
    report.n_bad_ids = int(bad.sum())
    if report.n_bad_ids:
        idx = np.flatnonzero(bad)[:10]
        report.messages.append(
            f"{report.n_bad_ids} point(s) with ID outside [0, {n_objects}]"
            f" (first indices: {idx.tolist()})"
        )
    nonfinite = ~np.isfinite(cloud.positions).all(axis=1)
    report.n_nonfinite = int(nonfinite.sum())
    if report.n_nonfinite:
        idx = np.flatnonzero(nonfinite)[:10]
        report.messages.append(
            f"{report.n_nonfinite} point(s) with non-finite coordinates"
            f" (first indices: {idx.tolist()})"
        )
    return report
