"""RGB images as 8-bit PNG; in-memory images are float arrays in [0, 1]."""

from __future__ import annotations

import numpy as np
from PIL import Image

from . import FormatError, atomic_write


def write_image(path, image: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise FormatError(f"expected an (H, W, 3) image, got shape {image.shape}")
    quant = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    with atomic_write(path) as f:
        Image.fromarray(quant, mode="RGB").save(f, format="PNG")


def read_image(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0
