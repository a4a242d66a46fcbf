"""Camera intrinsics/extrinsics as a JSON document.

Schema::

    {
      "format": "objsplat-cameras",
      "version": 1,
      "cameras": [
        {"fx": ..., "fy": ..., "cx": ..., "cy": ...,
         "width": ..., "height": ...,
         "qvec": [w, x, y, z], "tvec": [x, y, z]},
        ...
      ]
    }

Floats are written as decimal text with 17 significant digits, which
round-trips IEEE-754 doubles exactly.
"""

from __future__ import annotations

import json

import numpy as np

from ..scene import Camera
from . import FormatError, atomic_write

_MAGIC = "objsplat-cameras"
_VERSION = 1

_SCALAR_FIELDS = ("fx", "fy", "cx", "cy")
_INT_FIELDS = ("width", "height")


class _Float17(float):
    def __repr__(self) -> str:
        return format(float(self), ".17g")


def _f(x) -> _Float17:
    return _Float17(x)


def write_cameras(path, cameras: list[Camera]) -> None:
    doc = {
        "format": _MAGIC,
        "version": _VERSION,
        "cameras": [
            {
                "fx": _f(c.fx),
                "fy": _f(c.fy),
                "cx": _f(c.cx),
                "cy": _f(c.cy),
                "width": c.width,
                "height": c.height,
                "qvec": [_f(v) for v in c.qvec],
                "tvec": [_f(v) for v in c.tvec],
            }
            for c in cameras
        ],
    }
    with atomic_write(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def read_cameras(path) -> list[Camera]:
    with open(path, "r") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid camera JSON: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != _MAGIC:
        raise FormatError(f"camera file must declare format {_MAGIC!r}")
    if doc.get("version") != _VERSION:
        raise FormatError(f"unsupported camera file version {doc.get('version')!r}")
    if "cameras" not in doc or not isinstance(doc["cameras"], list):
        raise FormatError("camera file lacks a 'cameras' list")
    out = []
    for i, entry in enumerate(doc["cameras"]):
        for name in _SCALAR_FIELDS + _INT_FIELDS + ("qvec", "tvec"):
            if name not in entry:
                raise FormatError(f"camera {i}: missing field {name!r}")
        try:
            out.append(
                Camera(
                    fx=float(entry["fx"]),
                    fy=float(entry["fy"]),
                    cx=float(entry["cx"]),
                    cy=float(entry["cy"]),
                    width=int(entry["width"]),
                    height=int(entry["height"]),
                    qvec=np.asarray(entry["qvec"], dtype=np.float64),
                    tvec=np.asarray(entry["tvec"], dtype=np.float64),
                )
            )
        except (TypeError, ValueError) as e:
            raise FormatError(f"camera {i}: {e}") from e
    return out
