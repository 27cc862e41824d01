"""FastAPI app implementing the inpainting wire protocol.

POST /v1/inpaint takes UTF-8 JSON {"image": <base64 PNG>, "mask": <base64
PNG>, "strength": number, "seed": integer, "prompt"?: string,
"reference_image"?: <base64 PNG>, "steps"?: integer}. Mask pixels >= 128 mark
the region to fill. Success is 200 with {"image": <base64 PNG>}; every error
is {"error": <message>} with a 4xx/5xx status: malformed requests and
mismatched image/mask dimensions give 400, model out-of-memory gives 503.

Whatever the model returns, the response is composited so that pixels
outside the mask come from the input image byte for byte.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .codec import decode_mask, decode_rgb, encode_rgb
from .config import BridgeConfig
from .models import InpaintModel, load_model


class _BadRequest(Exception):
    pass


@dataclass
class _Parsed:
    image: np.ndarray
    mask: np.ndarray
    strength: float
    seed: int
    prompt: str | None
    reference: np.ndarray | None
    steps: int


def _parse_request(payload: dict, config: BridgeConfig) -> _Parsed:
    for key in ("image", "mask", "strength", "seed"):
        if key not in payload:
            raise _BadRequest(f"missing required field '{key}'")
    for key in ("image", "mask"):
        if not isinstance(payload[key], str):
            raise _BadRequest(f"'{key}' must be a base64 PNG string")
    try:
        image = decode_rgb(payload["image"])
    except ValueError as exc:
        raise _BadRequest(f"bad 'image': {exc}") from exc
    try:
        mask = decode_mask(payload["mask"])
    except ValueError as exc:
        raise _BadRequest(f"bad 'mask': {exc}") from exc
    if image.shape[:2] != mask.shape:
        raise _BadRequest(
            f"image is {image.shape[1]}x{image.shape[0]} "
            f"but mask is {mask.shape[1]}x{mask.shape[0]}"
        )

    strength = payload["strength"]
    if isinstance(strength, bool) or not isinstance(strength, (int, float)):
        raise _BadRequest("'strength' must be a number")
    if not 0.0 <= strength <= 1.0:
        raise _BadRequest(f"'strength' must be in [0, 1], got {strength}")
    seed = payload["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise _BadRequest("'seed' must be an integer")

    prompt = payload.get("prompt")
    if prompt is not None and not isinstance(prompt, str):
        raise _BadRequest("'prompt' must be a string")
    reference = None
    if payload.get("reference_image") is not None:
        if not isinstance(payload["reference_image"], str):
            raise _BadRequest("'reference_image' must be a base64 PNG string")
        try:
            reference = decode_rgb(payload["reference_image"])
        except ValueError as exc:
            raise _BadRequest(f"bad 'reference_image': {exc}") from exc
    if prompt is not None and reference is not None:
        raise _BadRequest("send either 'prompt' or 'reference_image', not both")

    # Conditioning must match the one model this server loaded.
    if config.model == "text-inpaint":
        if reference is not None:
            raise _BadRequest(
                "this server runs a text model; send 'prompt', not 'reference_image'"
            )
        if prompt is None:
            raise _BadRequest("this server runs a text model; 'prompt' is required")
    else:
        if prompt is not None:
            raise _BadRequest(
                "this server runs a reference model; send 'reference_image', not 'prompt'"
            )
        if reference is None:
            raise _BadRequest(
                "this server runs a reference model; 'reference_image' is required"
            )

    steps = payload.get("steps")
    if steps is not None:
        if isinstance(steps, bool) or not isinstance(steps, int):
            raise _BadRequest("'steps' must be an integer")
        if steps < 0:
            raise _BadRequest("'steps' must be >= 0")
    else:
        steps = config.steps_for(float(strength))
    return _Parsed(
        image=image,
        mask=mask,
        strength=float(strength),
        seed=seed,
        prompt=prompt,
        reference=reference,
        steps=steps,
    )


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _is_oom(exc: Exception) -> bool:
    return isinstance(exc, MemoryError) or type(exc).__name__ == "OutOfMemoryError"


def create_app(
    config: BridgeConfig | None = None, *, model: InpaintModel | None = None
) -> FastAPI:
    """Build the protocol server; pass `model` to skip loading a real pipeline."""
    config = config or BridgeConfig()
    if model is None:
        model = load_model(config)
    gate = threading.BoundedSemaphore(config.max_concurrency)
    app = FastAPI(title="inpaintbridge")
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    def bad_body(request: Request, exc: RequestValidationError):
        detail = exc.errors()[0]["msg"] if exc.errors() else str(exc)
        return _error(400, f"malformed request body: {detail}")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "model": config.model}

    @app.post("/v1/inpaint")
    def inpaint(payload: dict):
        try:
            req = _parse_request(payload, config)
        except _BadRequest as exc:
            return _error(400, str(exc))
        if req.steps == 0 or not req.mask.any():
            # zero denoising steps (or nothing to fill): echo the input verbatim
            return {"image": payload["image"]}
        with gate:
            try:
                out = model.inpaint(
                    req.image,
                    req.mask,
                    prompt=req.prompt,
                    reference=req.reference,
                    strength=req.strength,
                    steps=req.steps,
                    seed=req.seed,
                )
            except Exception as exc:
                if _is_oom(exc):
                    return _error(503, f"model ran out of memory: {exc}")
                return _error(500, f"model failure: {exc}")
        out = np.asarray(out)
        if out.shape != req.image.shape or out.dtype != np.uint8:
            return _error(
                500,
                f"model returned shape {out.shape} dtype {out.dtype} "
                f"for input {req.image.shape}",
            )
        composed = req.image.copy()
        composed[req.mask] = out[req.mask]
        return {"image": encode_rgb(composed)}

    return app
