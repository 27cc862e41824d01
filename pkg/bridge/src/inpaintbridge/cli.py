"""Command line launcher for the inpainting protocol server."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import MODEL_SELECTORS, BridgeConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inpaint-bridge",
        description="Serve POST /v1/inpaint over a diffusion inpainting model.",
    )
    parser.add_argument("--model", choices=MODEL_SELECTORS, default="text-inpaint")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9900)
    parser.add_argument("--base-steps", type=int, default=50,
                        help="denoising steps at strength 1.0")
    parser.add_argument("--max-concurrency", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = BridgeConfig(
        model=args.model,
        device=args.device,
        max_concurrency=args.max_concurrency,
        base_steps=args.base_steps,
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
