"""Command-line entry points: fit, edit, render, hull-preview, serve."""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

import numpy as np

from .engine import EditJobConfig, fit_field, run_edit_job
from .errors import HullpaintError
from .hull import VisualHull, hull_from_mesh, load_mesh_obj
from .imagecodec import float_to_image, png_encode
from .maskproj import render_hull_mask
from .rendering import SamplingConfig, render_view
from .sceneio import (
    load_checkpoint,
    load_manifest,
    load_mask_png,
    save_checkpoint,
)


def _sampling_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-samples", type=int, default=64, help="samples per ray")
    parser.add_argument("--near", type=float, default=0.5)
    parser.add_argument("--far", type=float, default=5.0)


def _sampling_from(args, jitter: bool = False) -> SamplingConfig:
    return SamplingConfig(n_samples=args.n_samples, near=args.near, far=args.far, jitter=jitter)


def _load_field(path: str):
    return load_checkpoint(path).build_field()


def cmd_fit(args) -> int:
    dataset = load_manifest(args.manifest)
    field = fit_field(
        dataset,
        n_steps=args.steps,
        batch_size=args.batch_size,
        sampling=_sampling_from(args, jitter=True),
        seed=args.seed,
    )
    save_checkpoint(args.out, field)
    print(f"wrote {args.out}")
    return 0


def _parse_mask_arg(spec: str) -> tuple[int, str]:
    """Either 'VIEW:path.png' or a path whose stem contains the view number."""
    if ":" in spec:
        head, _, path = spec.partition(":")
        if head.isdigit():
            return int(head), path
    stem = os.path.splitext(os.path.basename(spec))[0]
    match = re.search(r"(\d+)", stem)
    if not match:
        raise HullpaintError(
            f"cannot tell which view mask '{spec}' belongs to; use VIEW:PATH"
        )
    return int(match.group(1)), spec


def _build_hull_from_args(dataset, mask_specs, mesh_path, transform) -> VisualHull:
    if mask_specs:
        masks = []
        for spec in mask_specs:
            view, path = _parse_mask_arg(spec)
            if not 0 <= view < len(dataset):
                raise HullpaintError(f"mask '{spec}' names view {view}, but there are "
                                     f"{len(dataset)} views")
            masks.append(load_mask_png(path, dataset.entries[view].camera))
        return VisualHull(masks)
    if mesh_path:
        matrix = None
        if transform:
            matrix = np.asarray([float(v) for v in transform], dtype=np.float64).reshape(4, 4)
        return hull_from_mesh(load_mesh_obj(mesh_path, matrix))
    raise HullpaintError("need --mask entries or --mesh to define the edit region")


def cmd_hull_preview(args) -> int:
    dataset = load_manifest(args.manifest)
    field = _load_field(args.ckpt)
    hull = _build_hull_from_args(dataset, args.mask, args.mesh, args.transform)
    os.makedirs(args.out, exist_ok=True)
    sampling = _sampling_from(args)
    for i, entry in enumerate(dataset.entries):
        fmask = render_hull_mask(hull, field, entry.camera, sampling)
        path = os.path.join(args.out, f"mask_{i:04d}.png")
        with open(path, "wb") as fh:
            fh.write(png_encode(fmask.to_grayscale()))
    print(f"wrote {len(dataset)} masks to {args.out}")
    return 0


def _split_edit_config(path: str) -> tuple[dict, EditJobConfig]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    io_keys = {"manifest", "checkpoint", "output", "masks", "mesh", "events"}
    io_part = {k: doc.pop(k) for k in list(doc) if k in io_keys}
    for key in ("manifest", "checkpoint", "output"):
        if key not in io_part:
            raise HullpaintError(f"edit config: missing required field '{key}'")
    config = EditJobConfig.from_json(json.dumps(doc))
    return io_part, config


def cmd_edit(args) -> int:
    io_part, config = _split_edit_config(args.config)
    dataset = load_manifest(io_part["manifest"])
    field = _load_field(io_part["checkpoint"])
    mask_specs = [
        f"{m['view']}:{m['file']}" if isinstance(m, dict) else m
        for m in io_part.get("masks", [])
    ]
    mesh_entry = io_part.get("mesh") or {}
    hull = _build_hull_from_args(
        dataset, mask_specs, mesh_entry.get("file"), mesh_entry.get("transform")
    )
    if args.dry_run:
        print("configuration is valid")
        return 0
    events_path = io_part.get("events", io_part["output"] + ".events.jsonl")
    final, state = run_edit_job(config, dataset, field, hull)
    save_checkpoint(io_part["output"], final)
    with open(events_path, "w", encoding="utf-8") as fh:
        for record in state.events:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"wrote {io_part['output']} ({state.phase} at step {state.step})")
    return 0


def cmd_render(args) -> int:
    dataset = load_manifest(args.manifest)
    field = _load_field(args.ckpt)
    if args.views:
        indices = [int(v) for v in args.views.split(",")]
    else:
        indices = list(range(len(dataset)))
    os.makedirs(args.out, exist_ok=True)
    sampling = _sampling_from(args)
    for frame, i in enumerate(indices):
        if not 0 <= i < len(dataset):
            raise HullpaintError(f"view {i} out of range (0..{len(dataset) - 1})")
        img = render_view(field, dataset.entries[i].camera, sampling)
        path = os.path.join(args.out, f"frame_{frame:04d}.png")
        with open(path, "wb") as fh:
            fh.write(png_encode(float_to_image(img)))
    print(f"wrote {len(indices)} frames to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    dataset = load_manifest(args.manifest)
    field = _load_field(args.ckpt)
    app = create_app(
        dataset, field, sampling=_sampling_from(args), static_dir=args.static
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hullpaint",
        description="Local 3D edits of radiance fields via silhouette hulls and inpainting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="train the original field from a manifest")
    p_fit.add_argument("--manifest", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--steps", type=int, default=2000)
    p_fit.add_argument("--batch-size", type=int, default=1024)
    p_fit.add_argument("--seed", type=int, default=0)
    _sampling_args(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_edit = sub.add_parser("edit", help="run an edit job from a config file")
    p_edit.add_argument("--config", required=True)
    p_edit.add_argument("--dry-run", action="store_true")
    p_edit.set_defaults(func=cmd_edit)

    p_render = sub.add_parser("render", help="render views from a checkpoint")
    p_render.add_argument("--manifest", required=True)
    p_render.add_argument("--ckpt", required=True)
    p_render.add_argument("--out", required=True)
    p_render.add_argument("--views", help="comma-separated view indices; default all")
    _sampling_args(p_render)
    p_render.set_defaults(func=cmd_render)

    p_hull = sub.add_parser("hull-preview", help="write reprojected hull masks")
    p_hull.add_argument("--manifest", required=True)
    p_hull.add_argument("--ckpt", required=True)
    p_hull.add_argument("--mask", action="append", default=[], help="VIEW:PATH or vN.png")
    p_hull.add_argument("--mesh")
    p_hull.add_argument("--transform", nargs=16, metavar="V")
    p_hull.add_argument("--out", required=True)
    _sampling_args(p_hull)
    p_hull.set_defaults(func=cmd_hull_preview)

    p_serve = sub.add_parser("serve", help="start the annotation/job HTTP service")
    p_serve.add_argument("--manifest", required=True)
    p_serve.add_argument("--ckpt", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--static", help="directory with UI assets to serve at /")
    _sampling_args(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HullpaintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
