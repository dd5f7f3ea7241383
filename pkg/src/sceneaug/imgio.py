"""PNG codecs shared by the dataset format and the generation wire protocol.

Heights travel as 16-bit grayscale PNGs in whole millimeters (lossless for
tabletop scales, 65.535 m ceiling); masks as 8-bit 0/255 images.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


def encode_rgb_png(rgb: np.ndarray) -> bytes:
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError(f"expected HxWx3 uint8 rgb, got {rgb.shape} {rgb.dtype}")
    buf = io.BytesIO()
    Image.fromarray(rgb).save(buf, format="PNG")
    return buf.getvalue()


def decode_rgb_png(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data)).convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def height_to_mm_u16(height_m: np.ndarray) -> np.ndarray:
    mm = np.round(np.asarray(height_m, dtype=np.float64) * 1000.0)
    return np.clip(mm, 0, 65535).astype(np.uint16)


def mm_u16_to_height(mm: np.ndarray) -> np.ndarray:
    return (mm.astype(np.float64) / 1000.0).astype(np.float32)


def encode_height_png(height_m: np.ndarray) -> bytes:
    """Encode a float32 meter heightmap as 16-bit grayscale millimeters."""
    mm = height_to_mm_u16(height_m)
    buf = io.BytesIO()
    Image.fromarray(mm).save(buf, format="PNG")
    return buf.getvalue()


def decode_height_png(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    arr = np.asarray(img)
    if arr.dtype == np.int32:  # PIL may promote 16-bit grayscale to mode I
        arr = arr.astype(np.uint16)
    if arr.dtype != np.uint16:
        raise ValueError(f"expected 16-bit grayscale png, got dtype {arr.dtype}")
    return mm_u16_to_height(arr)


def encode_mask_png(mask: np.ndarray) -> bytes:
    """Encode a boolean mask as an 8-bit 0/255 grayscale PNG."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def decode_mask_png(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data)).convert("L")
    return np.asarray(img) >= 128


def encode_label_png(labels: np.ndarray) -> bytes:
    """Encode a small-integer label image (mask roles) as indexed PNG."""
    if labels.dtype != np.uint8:
        raise ValueError("label image must be uint8")
    img = Image.fromarray(labels, mode="P")
    img.putpalette(_label_palette())
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_label_png(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    if img.mode != "P":
        raise ValueError(f"expected indexed png, got mode {img.mode}")
    return np.asarray(img, dtype=np.uint8)


def _label_palette() -> list[int]:
    # 0 background, 1 pick (red), 2 place (green), 3+ distractors (cycled)
    base = [(0, 0, 0), (220, 40, 40), (40, 200, 40)]
    cycle = [(60, 60, 220), (220, 160, 40), (160, 60, 200), (40, 200, 200)]
    pal = list(base)
    while len(pal) < 256:
        pal.append(cycle[(len(pal) - 3) % len(cycle)])
    return [c for rgb in pal for c in rgb]


def to_b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def from_b64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)
