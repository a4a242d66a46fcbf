"""Synthetic desk-scale scenes with an independent ray-casting oracle.

The oracle renders exact RGB and ID maps by nearest-hit ray casting (flat
shading, one fixed directional light, black background) and shares no code
with the splatting rasterizer.  It also samples surface point clouds with
true object IDs and records unoccluded track correspondences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene import Camera, IdMap, LabeledPointCloud
from .voting import TrackCorrespondences, project_points

LIGHT_DIR = np.array([0.408248, 0.408248, -0.816497])  # normalized (1, 1, -2)
AMBIENT = 0.35
DIFFUSE = 0.65


class SceneSpecError(ValueError):
    pass


@dataclass
class SceneObject:
    shape: str  # sphere | box
    center: np.ndarray  # (3,)
    size: np.ndarray  # sphere: (1,) radius; box: (3,) half extents
    color: np.ndarray  # (3,) in [0, 1]
    object_id: int
    name: str = ""

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.size = np.atleast_1d(np.asarray(self.size, dtype=np.float64))
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)
        if self.shape not in ("sphere", "box"):
            raise SceneSpecError(f"unknown shape {self.shape!r}")
        if (self.size <= 0).any():
            raise SceneSpecError("object sizes must be positive")
        if not self.name:
            self.name = f"object{self.object_id}"


@dataclass
class SceneSpec:
    objects: list[SceneObject]
    n_views: int = 16
    ring_radius: float = 4.0
    ring_elevation: float = 0.6  # radians above the horizontal plane
    width: int = 128
    height: int = 128
    fov_deg: float = 50.0
    points_per_object: int = 1200
    label_noise: float = 0.0

    def __post_init__(self):
        ids = sorted(o.object_id for o in self.objects)
        if ids != list(range(1, len(ids) + 1)):
            raise SceneSpecError("object IDs must be 1..n with no gaps")
        if not (0.0 <= self.label_noise < 1.0):
            raise SceneSpecError("label_noise must lie in [0, 1)")
        if self.n_views < 1:
            raise SceneSpecError("need at least one view")

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    def id_names(self) -> dict[int, str]:
        return {o.object_id: o.name for o in self.objects}


@dataclass
class SynthDataset:
    cameras: list[Camera]
    images: list[np.ndarray]  # (H, W, 3) float64 in [0, 1]
    id_maps: list[IdMap]
    cloud: LabeledPointCloud
    tracks: TrackCorrespondences
    n_objects: int
    names: dict[int, str] = field(default_factory=dict)


def spec_from_dict(doc: dict) -> SceneSpec:
    """Build a SceneSpec from a plain JSON-style dictionary."""
    if not isinstance(doc, dict) or "objects" not in doc:
        raise SceneSpecError("scene spec must be an object with an 'objects' list")
    objects = []
    for i, entry in enumerate(doc["objects"]):
        for key in ("shape", "center", "size", "color", "object_id"):
            if key not in entry:
                raise SceneSpecError(f"object {i}: missing field {key!r}")
        objects.append(
            SceneObject(
                shape=entry["shape"],
                center=entry["center"],
                size=entry["size"],
                color=entry["color"],
                object_id=int(entry["object_id"]),
                name=entry.get("name", ""),
            )
        )
    kwargs = {}
    for key in (
        "n_views", "ring_radius", "ring_elevation", "width", "height",
        "fov_deg", "points_per_object", "label_noise",
    ):
        if key in doc:
            kwargs[key] = doc[key]
    return SceneSpec(objects=objects, **kwargs)


def _look_at_camera(position, target, width, height, fov_deg):
    forward = target - position
    forward = forward / np.linalg.norm(forward)
    world_up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, world_up)
    if np.linalg.norm(right) < 1e-9:
        world_up = np.array([0.0, 1.0, 0.0])
        right = np.cross(forward, world_up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])  # world-to-camera rows
    t = -R @ position
    q = _rotmat_to_quat(R)
    focal = 0.5 * width / math.tan(math.radians(fov_deg) / 2)
    return Camera(
        fx=focal, fy=focal, cx=(width - 1) / 2, cy=(height - 1) / 2,
        width=width, height=height, qvec=q, tvec=t,
    )


def _rotmat_to_quat(R: np.ndarray) -> np.ndarray:
    tr = np.trace(R)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s,
             (R[1, 0] - R[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k]) * 2
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    return q / np.linalg.norm(q)


def ring_cameras(spec: SceneSpec) -> list[Camera]:
    cams = []
    for i in range(spec.n_views):
        az = 2 * math.pi * i / spec.n_views
        pos = np.array(
            [
                spec.ring_radius * math.cos(az) * math.cos(spec.ring_elevation),
                spec.ring_radius * math.sin(az) * math.cos(spec.ring_elevation),
                spec.ring_radius * math.sin(spec.ring_elevation),
            ]
        )
        cams.append(
            _look_at_camera(
                pos, np.zeros(3), spec.width, spec.height, spec.fov_deg
            )
        )
    return cams


def _ray_sphere(origins, dirs, center, radius):
    oc = origins - center
    b = np.einsum("ij,ij->i", oc, dirs)
    c = np.einsum("ij,ij->i", oc, oc) - radius**2
    disc = b * b - c
    hit = disc >= 0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    t = np.where(t0 > 1e-6, t0, t1)
    t = np.where(hit & (t > 1e-6), t, np.inf)
    return t


def _ray_box(origins, dirs, center, half):
    lo = center - half
    hi = center + half
    inv = np.where(np.abs(dirs) > 1e-12, 1.0 / dirs, np.sign(dirs) * 1e12 + 1e12)
    t_lo = (lo - origins) * inv
    t_hi = (hi - origins) * inv
    t_near = np.minimum(t_lo, t_hi).max(axis=1)
    t_far = np.maximum(t_lo, t_hi).min(axis=1)
    hit = (t_far >= t_near) & (t_far > 1e-6)
    t = np.where(t_near > 1e-6, t_near, t_far)
    return np.where(hit & (t > 1e-6), t, np.inf)


def _object_hits(spec: SceneSpec, origins, dirs):
    """Per-object ray-hit distances, stacked (n_objects, n_rays)."""
    rows = []
    for obj in spec.objects:
        if obj.shape == "sphere":
            rows.append(_ray_sphere(origins, dirs, obj.center, obj.size[0]))
        else:
            half = obj.size if obj.size.size == 3 else np.repeat(obj.size, 3)
            rows.append(_ray_box(origins, dirs, obj.center, half))
    return np.stack(rows)


def _surface_normal(obj: SceneObject, points: np.ndarray) -> np.ndarray:
    if obj.shape == "sphere":
        n = points - obj.center
        return n / np.linalg.norm(n, axis=1, keepdims=True)
    half = obj.size if obj.size.size == 3 else np.repeat(obj.size, 3)
    rel = (points - obj.center) / half
    face = np.argmax(np.abs(rel), axis=1)
    n = np.zeros_like(points)
    n[np.arange(len(points)), face] = np.sign(rel[np.arange(len(points)), face])
    return n


def render_oracle(spec: SceneSpec, camera: Camera) -> tuple[np.ndarray, IdMap]:
    """Exact RGB image and ID map by nearest-hit ray casting."""
    h, w = camera.height, camera.width
    px, py = np.meshgrid(np.arange(w), np.arange(h))
    dirs_cam = np.stack(
        [
            (px.ravel() - camera.cx) / camera.fx,
            (py.ravel() - camera.cy) / camera.fy,
            np.ones(h * w),
        ],
        axis=1,
    )
    dirs = dirs_cam @ camera.rotation  # R^T applied row-wise
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(camera.center, dirs.shape)

    hits = _object_hits(spec, origins, dirs)
    nearest = hits.argmin(axis=0)
    t = hits[nearest, np.arange(hits.shape[1])]
    valid = np.isfinite(t)

    image = np.zeros((h * w, 3))
    ids = np.zeros(h * w, dtype=np.int32)
    for j, obj in enumerate(spec.objects):
        mask = valid & (nearest == j)
        if not mask.any():
            continue
        pts = origins[mask] + dirs[mask] * t[mask][:, None]
        normals = _surface_normal(obj, pts)
        shade = AMBIENT + DIFFUSE * np.maximum(0.0, -(normals @ LIGHT_DIR))
        image[mask] = np.clip(obj.color * shade[:, None], 0.0, 1.0)
        ids[mask] = obj.object_id
    return image.reshape(h, w, 3), IdMap(ids.reshape(h, w))


def _sample_surface(obj: SceneObject, n: int, rng: np.random.Generator) -> np.ndarray:
    if obj.shape == "sphere":
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return obj.center + obj.size[0] * v
    half = obj.size if obj.size.size == 3 else np.repeat(obj.size, 3)
    areas = np.array(
        [half[1] * half[2], half[0] * half[2], half[0] * half[1]]
    )
    face_axis = rng.choice(3, size=n, p=areas / areas.sum())
    sign = rng.choice([-1.0, 1.0], size=n)
    uv = rng.uniform(-1, 1, size=(n, 3))
    pts = uv * half
    pts[np.arange(n), face_axis] = sign * half[face_axis]
    return obj.center + pts


def _visible_in_view(spec, points, camera) -> np.ndarray:
    """True where the segment camera->point is not blocked by any surface."""
    origin = camera.center
    rel = points - origin
    dist = np.linalg.norm(rel, axis=1)
    dirs = rel / dist[:, None]
    hits = _object_hits(spec, np.broadcast_to(origin, dirs.shape), dirs)
    nearest_t = hits.min(axis=0)
    return nearest_t >= dist - 1e-6


def synth_generate(spec: SceneSpec, seed: int = 0) -> SynthDataset:
    rng = np.random.default_rng(seed)
    cameras = ring_cameras(spec)
    images, id_maps = [], []
    for camera in cameras:
        img, ids = render_oracle(spec, camera)
        images.append(img)
        id_maps.append(ids)

    positions, colors, true_ids = [], [], []
    for obj in spec.objects:
        pts = _sample_surface(obj, spec.points_per_object, rng)
        positions.append(pts)
        colors.append(np.tile(obj.color, (len(pts), 1)))
        true_ids.append(np.full(len(pts), obj.object_id, dtype=np.int32))
    positions = np.vstack(positions)
    colors = np.vstack(colors)
    ids = np.concatenate(true_ids)

    if spec.label_noise > 0:
        n_noise = int(round(spec.label_noise * len(ids)))
        corrupt = rng.choice(len(ids), size=n_noise, replace=False)
        for i in corrupt:
            wrong = [c for c in range(spec.n_objects + 1) if c != ids[i]]
            ids[i] = wrong[rng.integers(len(wrong))]

    cloud = LabeledPointCloud(positions, colors, ids)

    track_lists: list[list[tuple[int, int, int]]] = [[] for _ in range(len(cloud))]
    for view, camera in enumerate(cameras):
        pix, in_frame = project_points(positions, camera)
        visible = in_frame & _visible_in_view(spec, positions, camera)
        for i in np.flatnonzero(visible):
            track_lists[i].append((view, int(pix[i, 0]), int(pix[i, 1])))
    tracks = TrackCorrespondences(
        [np.array(t, dtype=np.int32).reshape(-1, 3) for t in track_lists]
    )
    return SynthDataset(
        cameras=cameras,
        images=images,
        id_maps=id_maps,
        cloud=cloud,
        tracks=tracks,
        n_objects=spec.n_objects,
        names=spec.id_names(),
    )
