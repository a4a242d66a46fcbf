"""Object-ID maps as 16-bit binary PGM (P5, maxval 65535, big-endian
samples) plus an optional JSON sidecar (``<path>.json``) mapping IDs to
object names."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..scene import IdMap
from . import FormatError, atomic_write


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_idmap(path, id_map: IdMap, names: dict[int, str] | None = None) -> None:
    ids = id_map.ids
    if (ids > 65535).any():
        raise FormatError("object IDs must fit in 16 bits")
    header = f"P5\n{id_map.width} {id_map.height}\n65535\n".encode("ascii")
    with atomic_write(path) as f:
        f.write(header)
        f.write(ids.astype(">u2").tobytes())
    if names is not None:
        payload = {"names": {str(k): v for k, v in sorted(names.items())}}
        with atomic_write(_sidecar_path(path), "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited token, skipping '#' comments per the PGM spec."""
    while pos < len(data):
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl == -1 else nl + 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError(f"unexpected end of PGM header at byte offset {start}")
    return data[start:pos], pos


def read_idmap(path) -> tuple[IdMap, dict[int, str]]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] != b"P5":
        raise FormatError("not a binary PGM: magic must be P5")
    pos = 2
    fields = []
    for _ in range(3):  # width, height, maxval
        token, pos = _read_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError as e:
            raise FormatError(f"non-numeric PGM header token {token!r}") from e
    width, height, maxval = fields
    if maxval != 65535:
        raise FormatError(f"PGM maxval must be 65535 (16-bit), got {maxval}")
    pos += 1  # exactly one whitespace byte after maxval
    need = width * height * 2
    if len(data) - pos < need:
        raise FormatError(
            f"truncated PGM body: need {need} bytes from byte offset {pos}"
        )
    ids = (
        np.frombuffer(data, dtype=">u2", count=width * height, offset=pos)
        .reshape(height, width)
        .astype(np.int32)
    )

    names: dict[int, str] = {}
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        with open(sidecar, "r") as f:
            payload = json.load(f)
        if not isinstance(payload, dict) or "names" not in payload:
            raise FormatError(f"sidecar {sidecar} lacks a 'names' object")
        names = {int(k): str(v) for k, v in payload["names"].items()}
    return IdMap(ids), names
