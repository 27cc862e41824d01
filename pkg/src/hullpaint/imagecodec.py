"""Lossless 8-bit PNG encode/decode plus the base64 wire helpers."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import InvalidInputError


def png_encode(array: np.ndarray) -> bytes:
    """Encode a (H, W) grayscale or (H, W, 3) RGB uint8 array as PNG bytes."""
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        raise InvalidInputError(f"PNG encoding expects uint8, got {arr.dtype}")
    if arr.ndim == 2:
        img = Image.fromarray(arr, mode="L")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        img = Image.fromarray(arr, mode="RGB")
    else:
        raise InvalidInputError(f"unsupported image shape {arr.shape}")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def png_decode(data: bytes) -> np.ndarray:
    """Decode PNG bytes to uint8; grayscale stays 2D, color becomes (H, W, 3)."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise InvalidInputError(f"could not decode PNG: {exc}") from exc
    if img.mode in ("L", "1", "I;16", "I"):
        return np.asarray(img.convert("L"), dtype=np.uint8)
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def png_b64_encode(array: np.ndarray) -> str:
    return base64.b64encode(png_encode(array)).decode("ascii")


def png_b64_decode(text: str) -> np.ndarray:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as exc:
        raise InvalidInputError(f"invalid base64 payload: {exc}") from exc
    return png_decode(raw)


def image_to_float(array: np.ndarray) -> np.ndarray:
    """uint8 [0,255] to float64 [0,1]."""
    return np.asarray(array, dtype=np.float64) / 255.0


def float_to_image(array: np.ndarray) -> np.ndarray:
    """float [0,1] to uint8 with round-half-to-even, clipping first."""
    return np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8)
