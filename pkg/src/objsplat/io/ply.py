"""Labeled point clouds as binary little-endian PLY.

Vertex layout (in this order):

    property float  x, y, z
    property uchar  red, green, blue
    property ushort object_id

Colors in [0, 1] are quantized to 8 bits on write (round(c * 255)).
Parse failures report the byte offset of the offending data.
"""

from __future__ import annotations

import numpy as np

from ..scene import LabeledPointCloud
from . import FormatError, atomic_write

_VERTEX_DTYPE = np.dtype(
    [
        ("x", "<f4"),
        ("y", "<f4"),
        ("z", "<f4"),
        ("red", "u1"),
        ("green", "u1"),
        ("blue", "u1"),
        ("object_id", "<u2"),
    ]
)

_HEADER_TEMPLATE = (
    "ply\n"
    "format binary_little_endian 1.0\n"
    "element vertex {n}\n"
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "property uchar red\n"
    "property uchar green\n"
    "property uchar blue\n"
    "property ushort object_id\n"
    "end_header\n"
)


def write_labeled_ply(path, cloud: LabeledPointCloud) -> None:
    n = len(cloud)
    if (cloud.ids < 0).any() or (cloud.ids > 65535).any():
        raise FormatError("object IDs must fit in 16 bits")
    rec = np.empty(n, dtype=_VERTEX_DTYPE)
    pos = cloud.positions.astype("<f4")
    rec["x"], rec["y"], rec["z"] = pos[:, 0], pos[:, 1], pos[:, 2]
    rgb = np.rint(np.clip(cloud.colors, 0.0, 1.0) * 255.0).astype("u1")
    rec["red"], rec["green"], rec["blue"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    rec["object_id"] = cloud.ids.astype("<u2")
    with atomic_write(path) as f:
        f.write(_HEADER_TEMPLATE.format(n=n).encode("ascii"))
        f.write(rec.tobytes())


_EXPECTED_PROPERTIES = [
    ("float", "x"),
    ("float", "y"),
    ("float", "z"),
    ("uchar", "red"),
    ("uchar", "green"),
    ("uchar", "blue"),
    ("ushort", "object_id"),
]


def read_labeled_ply(path) -> LabeledPointCloud:
    with open(path, "rb") as f:
        data = f.read()

    # --- header ---
    offset = 0
    lines: list[str] = []
    while True:
        end = data.find(b"\n", offset)
        if end == -1:
            raise FormatError(
                f"unterminated PLY header at byte offset {offset}"
            )
        try:
            line = data[offset:end].decode("ascii")
        except UnicodeDecodeError as e:
            raise FormatError(
                f"non-ASCII PLY header at byte offset {offset}"
            ) from e
        lines.append(line)
        offset = end + 1
        if line == "end_header":
            break
        if offset > 65536:
            raise FormatError("PLY header exceeds 64 KiB")

    if not lines or lines[0] != "ply":
        raise FormatError("missing 'ply' magic at byte offset 0")
    if "format binary_little_endian 1.0" not in lines:
        raise FormatError("PLY format must be binary_little_endian 1.0")

    n = None
    props: list[tuple[str, str]] = []
    for line in lines:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts and parts[0] == "element" and n is not None and props:
            break  # only the vertex element is read
        elif parts and parts[0] == "property" and n is not None:
            props.append((parts[1], parts[2]))
    if n is None:
        raise FormatError("PLY header lacks an 'element vertex' declaration")
    for expected in _EXPECTED_PROPERTIES:
        if expected not in props:
            raise FormatError(
                f"PLY header lacks required property {expected[1]!r}"
            )
    if props != _EXPECTED_PROPERTIES:
        raise FormatError(
            "PLY vertex properties must be exactly "
            + ", ".join(name for _, name in _EXPECTED_PROPERTIES)
            + " in that order"
        )

    # --- body ---
    need = n * _VERTEX_DTYPE.itemsize
    if len(data) - offset < need:
        raise FormatError(
            f"truncated PLY body: need {need} bytes from byte offset "
            f"{offset}, file ends at {len(data)}"
        )
    rec = np.frombuffer(data, dtype=_VERTEX_DTYPE, count=n, offset=offset)
    positions = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    colors = np.stack([rec["red"], rec["green"], rec["blue"]], axis=1) / 255.0
    ids = rec["object_id"].astype(np.int32)
    return LabeledPointCloud(positions, colors, ids)
