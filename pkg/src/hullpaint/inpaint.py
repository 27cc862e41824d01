"""Inpainting backends: a deterministic mock and a remote wire-protocol client."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import requests
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import InvalidInputError, ProtocolError, TransportError
from .imagecodec import float_to_image, image_to_float, png_b64_decode, png_b64_encode

NAMED_COLORS = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0),
    "black": (0.0, 0.0, 0.0),
    "gray": (0.5, 0.5, 0.5),
}


@dataclass
class InpaintRequest:
    """One inpainting call: 8-bit image, binary mask, optional conditioning."""

    image: np.ndarray  # (H, W, 3) uint8
    mask: np.ndarray  # (H, W) bool
    strength: float
    seed: int = 0
    prompt: str | None = None
    reference_image: np.ndarray | None = None  # (h, w, 3) uint8
    steps: int | None = None

    def __post_init__(self):
        self.image = np.asarray(self.image)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.image.dtype != np.uint8 or self.image.ndim != 3 or self.image.shape[2] != 3:
            raise InvalidInputError("image must be (H, W, 3) uint8")
        if self.mask.shape != self.image.shape[:2]:
            raise InvalidInputError(
                f"mask shape {self.mask.shape} does not match image {self.image.shape[:2]}"
            )
        if not 0.0 <= self.strength <= 1.0:
            raise InvalidInputError(f"strength must be in [0, 1], got {self.strength}")
        if self.prompt is not None and self.reference_image is not None:
            raise InvalidInputError("conditioning is at most one of prompt or reference image")
        if self.reference_image is not None:
            ref = np.asarray(self.reference_image)
            if ref.dtype != np.uint8 or ref.ndim != 3 or ref.shape[2] != 3:
                raise InvalidInputError("reference image must be (H, W, 3) uint8")
            self.reference_image = ref


@dataclass
class InpaintResponse:
    image: np.ndarray  # (H, W, 3) uint8


class InpaintBackend(Protocol):
    def inpaint(self, request: InpaintRequest) -> InpaintResponse: ...


def parse_target(spec: str) -> tuple[str, np.ndarray | None]:
    """Mock target specs: "solid:<name|r,g,b>", "tile", "smooth"."""
    spec = spec.strip()
    if spec.startswith("solid:"):
        body = spec[len("solid:") :].strip().lower()
        if body in NAMED_COLORS:
            rgb = np.array(NAMED_COLORS[body], dtype=np.float64)
        else:
            try:
                rgb = np.array([float(p) for p in body.split(",")], dtype=np.float64)
            except ValueError as exc:
                raise InvalidInputError(f"bad solid color '{body}'") from exc
            if rgb.shape != (3,) or rgb.min() < 0.0 or rgb.max() > 1.0:
                raise InvalidInputError(f"solid color needs 3 values in [0, 1], got '{body}'")
        return "solid", rgb
    if spec == "tile":
        return "tile", None
    if spec == "smooth":
        return "smooth", None
    raise InvalidInputError(f"unknown mock target spec '{spec}'")


def _harmonic_fill(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Solve the Laplace equation on masked pixels with unmasked boundary values."""
    h, w = mask.shape
    if not mask.any():
        return image.copy()
    if mask.all():
        return np.full_like(image, 0.5)

    idx = -np.ones((h, w), dtype=np.int64)
    ys, xs = np.nonzero(mask)
    n = len(ys)
    idx[ys, xs] = np.arange(n)

    rows, cols, vals = [], [], []
    rhs = np.zeros((n, image.shape[2]), dtype=np.float64)
    diag = np.zeros(n, dtype=np.float64)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = ys + dy, xs + dx
        in_img = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        diag += in_img
        ny, nx = ny[in_img], nx[in_img]
        src = np.flatnonzero(in_img)
        neighbor = idx[ny, nx]
        interior = neighbor >= 0
        rows.extend(src[interior])
        cols.extend(neighbor[interior])
        vals.extend([-1.0] * int(interior.sum()))
        boundary = ~interior
        rhs[src[boundary]] += image[ny[boundary], nx[boundary]]
    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(diag)

    lap = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    out = image.copy()
    solution = spsolve(lap, rhs)
    out[ys, xs] = np.atleast_2d(solution).reshape(n, image.shape[2])
    return out


def mock_inpaint(
    image: np.ndarray,
    mask: np.ndarray,
    target: str,
    strength: float,
    *,
    reference: np.ndarray | None = None,
) -> np.ndarray:
    """Blend masked pixels toward a synthetic target: (1-s)*input + s*target.

    Operates on float arrays in [0, 1]; unmasked pixels come back untouched.
    """
    if not 0.0 <= strength <= 1.0:
        raise InvalidInputError(f"strength must be in [0, 1], got {strength}")
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if image.ndim != 3 or image.shape[2] != 3 or mask.shape != image.shape[:2]:
        raise InvalidInputError("image must be (H, W, 3) with a matching (H, W) mask")

    kind, rgb = parse_target(target)
    if kind == "solid":
        filled = np.broadcast_to(rgb, image.shape)
    elif kind == "tile":
        if reference is None:
            raise InvalidInputError("tile target needs a reference image")
        ref = np.asarray(reference, dtype=np.float64)
        h, w = image.shape[:2]
        ty = np.arange(h) % ref.shape[0]
        tx = np.arange(w) % ref.shape[1]
        filled = ref[np.ix_(ty, tx)]
    else:
        filled = _harmonic_fill(image, mask)

    out = image.copy()
    out[mask] = (1.0 - strength) * image[mask] + strength * filled[mask]
    return out


class MockBackend:
    """Deterministic stand-in for a diffusion inpainter; reentrant and offline."""

    def __init__(self, target: str):
        parse_target(target)  # fail fast on bad specs
        self.target = target

    def inpaint(self, request: InpaintRequest) -> InpaintResponse:
        ref = None
        if request.reference_image is not None:
            ref = image_to_float(request.reference_image)
        out = mock_inpaint(
            image_to_float(request.image),
            request.mask,
            self.target,
            request.strength,
            reference=ref,
        )
        result = float_to_image(out)
        result[~request.mask] = request.image[~request.mask]
        return InpaintResponse(image=result)


class RemoteBackend:
    """Client for the HTTP inpainting protocol (POST <endpoint>/v1/inpaint).

    Transport failures and 5xx responses are retried a bounded number of
    times; 4xx responses and malformed payloads are protocol errors and are
    not retried.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        timeout: float = 120.0,
        retries: int = 2,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.url = endpoint.rstrip("/") + "/v1/inpaint"
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def _body(self, request: InpaintRequest) -> dict:
        body = {
            "image": png_b64_encode(request.image),
            "mask": png_b64_encode(np.where(request.mask, 255, 0).astype(np.uint8)),
            "strength": float(request.strength),
            "seed": int(request.seed),
        }
        if request.prompt is not None:
            body["prompt"] = request.prompt
        if request.reference_image is not None:
            body["reference_image"] = png_b64_encode(request.reference_image)
        if request.steps is not None:
            body["steps"] = int(request.steps)
        return body

    def inpaint(self, request: InpaintRequest) -> InpaintResponse:
        body = self._body(request)
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt > 0 and self.backoff > 0:
                time.sleep(self.backoff * attempt)
            try:
                resp = self._session.post(self.url, json=body, timeout=self.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_exc = exc
                continue
            if 400 <= resp.status_code < 500:
                raise ProtocolError(
                    f"inpaint server rejected the request ({resp.status_code}): "
                    f"{_server_message(resp)}"
                )
            if resp.status_code != 200:
                last_exc = TransportError(
                    f"inpaint server error {resp.status_code}: {_server_message(resp)}"
                )
                continue
            return self._parse_success(request, resp)
        raise TransportError(
            f"inpaint request failed after {self.retries + 1} attempts: {last_exc}"
        )

    def _parse_success(self, request: InpaintRequest, resp) -> InpaintResponse:
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"inpaint response is not JSON: {exc}") from exc
        if not isinstance(payload, dict) or "image" not in payload:
            raise ProtocolError("inpaint response missing 'image' field")
        try:
            image = png_b64_decode(payload["image"])
        except InvalidInputError as exc:
            raise ProtocolError(f"inpaint response image is invalid: {exc}") from exc
        if image.ndim != 3 or image.shape != request.image.shape:
            raise ProtocolError(
                f"inpaint response dimensions {image.shape[:2]} do not match "
                f"request {request.image.shape[:2]}"
            )
        return InpaintResponse(image=image)


def _server_message(resp) -> str:
    try:
        payload = resp.json()
        if isinstance(payload, dict) and "error" in payload:
            return str(payload["error"])
    except ValueError:
        pass
    return resp.text[:200]


def parse_backend(spec: str, **remote_kwargs) -> InpaintBackend:
    """Backend factory: "mock:<target>" or an http(s) endpoint URL."""
    if spec.startswith("mock:"):
        return MockBackend(spec[len("mock:") :])
    if spec.startswith("http://") or spec.startswith("https://"):
        return RemoteBackend(spec, **remote_kwargs)
    raise InvalidInputError(f"backend must be 'mock:<target>' or an http(s) URL, got '{spec}'")
