"""File formats: labeled PLY clouds, 16-bit PGM ID maps with JSON sidecars,
camera JSON, versioned binary checkpoints, key-value config text, track
correspondences, and PNG images.

All writers are atomic (write to a temporary file in the destination
directory, then rename).
"""

from __future__ import annotations

import os
import tempfile
from contextlib import contextmanager
from pathlib import Path


class FormatError(ValueError):
    """A file does not conform to its documented layout."""


@contextmanager
def atomic_write(path, mode: str = "wb"):
    """Write to ``path`` via a temporary sibling file plus rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


from .cameras import read_cameras, write_cameras  # noqa: E402
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint  # noqa: E402
from .config import config_from_text, config_to_text, read_config, write_config  # noqa: E402
from .image import read_image, write_image  # noqa: E402
from .pgm import read_idmap, write_idmap  # noqa: E402
from .ply import read_labeled_ply, write_labeled_ply  # noqa: E402
from .tracks import read_tracks, write_tracks  # noqa: E402

__all__ = [
    "FormatError",
    "atomic_write",
    "read_labeled_ply",
    "write_labeled_ply",
    "read_idmap",
    "write_idmap",
    "read_cameras",
    "write_cameras",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "config_to_text",
    "config_from_text",
    "read_config",
    "write_config",
    "read_tracks",
    "write_tracks",
    "read_image",
    "write_image",
]
