"""Shared fixtures: a deterministic fake model and a live HTTP server."""

from __future__ import annotations

import base64
import io
import threading
import time

import numpy as np
import pytest
import uvicorn
from PIL import Image

from inpaintbridge import BridgeConfig, create_app


def fake_output(shape: tuple, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=shape, dtype=np.uint8)


class FakeModel:
    """Stand-in model: output depends only on seed and image shape."""

    def __init__(self, fail_with: Exception | None = None, delay: float = 0.0):
        self.fail_with = fail_with
        self.delay = delay
        self.calls: list[dict] = []
        self.spans: list[tuple[float, float]] = []
        self.lock = threading.Lock()

    def inpaint(self, image, mask, *, prompt, reference, strength, steps, seed):
        start = time.perf_counter()
        if self.delay:
            time.sleep(self.delay)
        end = time.perf_counter()
        with self.lock:
            self.calls.append(
                {
                    "shape": image.shape,
                    "masked": int(mask.sum()),
                    "prompt": prompt,
                    "reference_shape": None if reference is None else reference.shape,
                    "strength": strength,
                    "steps": steps,
                    "seed": seed,
                }
            )
            self.spans.append((start, end))
        if self.fail_with is not None:
            raise self.fail_with
        return fake_output(image.shape, seed)


@pytest.fixture
def fake_model():
    return FakeModel()


def make_app(fake, **cfg):
    return create_app(BridgeConfig(**cfg), model=fake)


def gradient_image(h: int = 24, w: int = 32) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    g = np.stack(
        [255 * xx / max(w - 1, 1), 255 * yy / max(h - 1, 1), np.full_like(xx, 64)],
        axis=-1,
    )
    return g.astype(np.uint8)


def disc_mask(h: int = 24, w: int = 32, r: float = 7.0) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - h / 2.0) ** 2 + (xx - w / 2.0) ** 2 <= r * r


def b64_png_rgb(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def b64_png_gray(values: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(values.astype(np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_b64_png(data: str) -> np.ndarray:
    img = Image.open(io.BytesIO(base64.b64decode(data)))
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def wire_body(image_arr=None, mask_arr=None, **overrides) -> dict:
    """Valid request body; keyword overrides patch the encoded wire fields."""
    image = gradient_image() if image_arr is None else image_arr
    mask = disc_mask() if mask_arr is None else mask_arr
    body = {
        "image": b64_png_rgb(image),
        "mask": b64_png_gray(np.where(mask, 255, 0)),
        "strength": 1.0,
        "seed": 7,
        "prompt": "a red sphere",
    }
    body.update(overrides)
    return {k: v for k, v in body.items() if v is not None}


class LiveServer:
    """uvicorn on an ephemeral port, on a daemon thread."""

    def __init__(self, app):
        self._config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self.server = uvicorn.Server(self._config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    @property
    def url(self) -> str:
        sock = self.server.servers[0].sockets[0]
        return f"http://127.0.0.1:{sock.getsockname()[1]}"

    def __enter__(self):
        self.thread.start()
        deadline = time.time() + 15
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("bridge server did not start in time")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=15)
