"""Base64 PNG helpers for the wire protocol."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


def _open(data: str) -> Image.Image:
    try:
        raw = base64.b64decode(data, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise ValueError(f"not a base64 PNG: {exc}") from exc
    return img


def decode_rgb(data: str) -> np.ndarray:
    """Decode a base64 PNG into (H, W, 3) uint8, converting grayscale up."""
    return np.asarray(_open(data).convert("RGB"), dtype=np.uint8)


def decode_mask(data: str) -> np.ndarray:
    """Decode a base64 PNG mask; values >= 128 mark pixels to inpaint."""
    values = np.asarray(_open(data).convert("L"), dtype=np.uint8)
    return values >= 128


def encode_rgb(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image), mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")
