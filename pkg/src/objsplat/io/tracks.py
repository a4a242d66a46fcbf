"""Track correspondences as a small binary format.

Layout (little-endian)::

    bytes 0..7   magic "OSPLATTR"
    bytes 8..11  version (u32), currently 1
    bytes 12..19 number of points (u64)
    per point:   observation count (u32), then count * 3 i32 values
                 (view index, pixel x, pixel y)
"""

from __future__ import annotations

import struct

import numpy as np

from ..voting import TrackCorrespondences
from . import FormatError, atomic_write

MAGIC = b"OSPLATTR"
VERSION = 1


def write_tracks(path, tracks: TrackCorrespondences) -> None:
    with atomic_write(path) as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(tracks)))
        for obs in tracks.tracks:
            f.write(struct.pack("<I", len(obs)))
            f.write(np.ascontiguousarray(obs, dtype="<i4").tobytes())


def read_tracks(path) -> TrackCorrespondences:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != MAGIC:
        raise FormatError(f"bad tracks magic at byte offset 0 (want {MAGIC!r})")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != VERSION:
        raise FormatError(f"unsupported tracks version {version}")
    (n,) = struct.unpack_from("<Q", data, 12)
    offset = 20
    out = []
    for i in range(n):
        if len(data) - offset < 4:
            raise FormatError(
                f"truncated tracks file: point {i} count missing at byte offset {offset}"
            )
        (count,) = struct.unpack_from("<I", data, offset)
        offset += 4
        nbytes = count * 3 * 4
        if len(data) - offset < nbytes:
            raise FormatError(
                f"truncated tracks file: point {i} needs {nbytes} bytes at "
                f"byte offset {offset}"
            )
        obs = np.frombuffer(data, dtype="<i4", count=count * 3, offset=offset)
        out.append(obs.reshape(count, 3).astype(np.int32))
        offset += nbytes
    if offset != len(data):
        raise FormatError(
            f"{len(data) - offset} unexpected trailing byte(s) at offset {offset}"
        )
    return TrackCorrespondences(out)
