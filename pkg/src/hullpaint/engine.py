"""Edit orchestration: noise-annealed dataset updates around constrained training."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np

from .errors import InvalidInputError, TrainingDivergedError, TransportError
from .fields import FieldConfig, RadianceField
from .hull import MaskImage, VisualHull
from .imagecodec import float_to_image
from .inpaint import InpaintBackend, InpaintRequest, parse_backend
from .maskproj import FloatMask, binarize, dilate, render_hull_mask, select_crop
from .rendering import SamplingConfig, render_view
from .rngutil import derive_rng, derive_seed
from .sceneio import SceneDataset, load_checkpoint, save_checkpoint
from .training import LossWeights, make_optimizer, sample_training_batch, train_step


@dataclass
class EditJobConfig:
    """Everything one edit run needs; defaults are the full-scale settings."""

    n_steps: int = 90000
    n_update: int = 6000
    lambda_c: float = 100.0
    lambda_sigma: float = 1000.0
    dilation_diameter: int = 11
    crop_interval: tuple[float, float] = (1.5, 2.5)
    prompt: str | None = None
    reference_image_file: str | None = None
    backend: str = "mock:solid:gray"
    sampling: SamplingConfig = dataclass_field(default_factory=SamplingConfig)
    batch_size: int = 1024
    lr_grid: float = 1e-2
    lr_heads: float = 1e-3
    seed: int = 0
    checkpoint_every: int = 0
    checkpoint_path: str | None = None
    l_out_enabled: bool = True
    opacity_uses_delta: bool = False
    strict_updates: bool = False
    reset_optimizer_on_update: bool = False
    mask_threshold: float = 0.5
    sigma_in: float = 1e4
    max_inflight: int = 4
    reference_image: np.ndarray | None = dataclass_field(default=None, repr=False)

    def __post_init__(self):
        if self.n_steps < 0:
            raise InvalidInputError(f"n_steps must be >= 0, got {self.n_steps}")
        if self.n_update < 1:
            raise InvalidInputError(f"n_update must be >= 1, got {self.n_update}")
        if self.n_steps > 0 and self.n_update > self.n_steps:
            raise InvalidInputError(
                f"n_update ({self.n_update}) must not exceed n_steps ({self.n_steps})"
            )
        k_min, k_max = self.crop_interval
        if not (1.0 <= k_min <= k_max):
            raise InvalidInputError(f"bad crop interval {self.crop_interval}")
        if self.prompt is not None and (
            self.reference_image is not None or self.reference_image_file is not None
        ):
            raise InvalidInputError("conditioning is at most one of prompt or reference image")

    _JSON_FIELDS = (
        "n_steps", "n_update", "lambda_c", "lambda_sigma", "dilation_diameter",
        "crop_interval", "prompt", "reference_image_file", "backend", "batch_size",
        "lr_grid", "lr_heads", "seed", "checkpoint_every", "checkpoint_path",
        "l_out_enabled", "opacity_uses_delta", "strict_updates",
        "reset_optimizer_on_update", "mask_threshold", "sigma_in", "max_inflight",
    )

    def to_json(self) -> str:
        doc = {name: getattr(self, name) for name in self._JSON_FIELDS}
        doc["crop_interval"] = list(self.crop_interval)
        doc["sampling"] = {
            "n_samples": self.sampling.n_samples,
            "near": self.sampling.near,
            "far": self.sampling.far,
            "jitter": self.sampling.jitter,
            "seed": self.sampling.seed,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EditJobConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"job config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidInputError("job config must be a JSON object")
        sampling = SamplingConfig(**doc.pop("sampling", {}))
        unknown = set(doc) - set(cls._JSON_FIELDS)
        if unknown:
            raise InvalidInputError(f"job config has unknown fields: {sorted(unknown)}")
        if "crop_interval" in doc:
            doc["crop_interval"] = tuple(doc["crop_interval"])
        return cls(sampling=sampling, **doc)


def desk_profile(**overrides) -> EditJobConfig:
    """Scaled-down configuration sized for tests and laptop runs."""
    base = dict(
        n_steps=3000,
        n_update=200,
        sampling=SamplingConfig(n_samples=64, near=0.5, far=5.0, jitter=True),
        batch_size=1024,
    )
    base.update(overrides)
    return EditJobConfig(**base)


@dataclass
class JobState:
    """Mutable progress record; event log is line-JSON friendly."""

    step: int = 0
    phase: str = "training"
    last_strength: float | None = None
    view_updated_at: dict[int, int] = dataclass_field(default_factory=dict)
    events: list[dict] = dataclass_field(default_factory=list)
    event_sink: Callable[[dict], None] | None = dataclass_field(default=None, repr=False)

    def log(self, step: int, event: str, detail: dict | None = None) -> None:
        record = {"step": step, "event": event, "detail": detail or {}}
        self.events.append(record)
        if self.event_sink is not None:
            self.event_sink(record)

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "phase": self.phase,
            "last_strength": self.last_strength,
            "view_updated_at": {str(k): v for k, v in self.view_updated_at.items()},
            "events": self.events,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "JobState":
        return cls(
            step=int(doc.get("step", 0)),
            phase=str(doc.get("phase", "training")),
            last_strength=doc.get("last_strength"),
            view_updated_at={int(k): int(v) for k, v in doc.get("view_updated_at", {}).items()},
            events=list(doc.get("events", [])),
        )


def strength_at(n: int, n_steps: int) -> float:
    """Annealed inpainting strength, 1.0 at the start down to 0.2 at the end.

    Computed as (5 - 4*sqrt(n/n_steps)) / 5 so both endpoints are exact in
    floating point.
    """
    if n_steps <= 0:
        raise InvalidInputError(f"n_steps must be positive, got {n_steps}")
    if not 0 <= n <= n_steps:
        raise InvalidInputError(f"step {n} outside [0, {n_steps}]")
    return (5.0 - 4.0 * math.sqrt(n / n_steps)) / 5.0


def update_dataset(
    field: RadianceField,
    frozen,
    dataset: SceneDataset,
    hull: VisualHull,
    backend: InpaintBackend,
    s: float,
    config: EditJobConfig,
    *,
    step: int = 0,
    state: JobState | None = None,
    mask_cache: dict[int, FloatMask] | None = None,
) -> list[int]:
    """Replace every training image with an inpainted render of the field.

    Views whose reprojected mask is empty get the plain render. Backend output
    is composited back through the non-dilated mask so unmasked pixels stay
    bit-exact with the render. Returns the replaced view indices.
    """
    render_sampling = config.sampling.with_jitter(False)
    pending = []  # (view, render_u8, crop, crop_mask, request) or (view, render_u8)
    for v, entry in enumerate(dataset.entries):
        render = render_view(field, entry.camera, render_sampling)
        render_u8 = float_to_image(render)
        if mask_cache is not None and v in mask_cache:
            fmask = mask_cache[v]
        else:
            fmask = render_hull_mask(
                hull, frozen, entry.camera, render_sampling, sigma_in=config.sigma_in
            )
            if mask_cache is not None:
                mask_cache[v] = fmask
        bmask = binarize(fmask, config.mask_threshold)
        if bmask.n_set == 0:
            pending.append((v, render_u8, None, None, None))
            continue
        crop = select_crop(
            bmask, config.crop_interval, seed=derive_seed(config.seed, "crop", step, v)
        )
        sl = crop.slices
        crop_mask = bmask.bitmap[sl]
        dilated = dilate(
            MaskImage(width=crop.side, height=crop.side, bitmap=crop_mask),
            config.dilation_diameter,
        )
        request = InpaintRequest(
            image=render_u8[sl],
            mask=dilated.bitmap,
            strength=s,
            seed=derive_seed(config.seed, "inpaint", step, v) % (2**31),
            prompt=config.prompt,
            reference_image=config.reference_image,
        )
        pending.append((v, render_u8, crop, crop_mask, request))

    requests = [(v, req) for v, _, _, _, req in pending if req is not None]
    results: dict[int, object] = {}
    if requests:
        with ThreadPoolExecutor(max_workers=max(1, config.max_inflight)) as pool:
            futures = {v: pool.submit(backend.inpaint, req) for v, req in requests}
        for v, future in futures.items():
            try:
                results[v] = future.result()
            except TransportError as exc:
                if config.strict_updates:
                    raise
                results[v] = exc

    replaced = []
    for v, render_u8, crop, crop_mask, request in pending:
        if request is None:
            dataset.replace_image(v, render_u8)
        else:
            outcome = results[v]
            if isinstance(outcome, TransportError):
                if state is not None:
                    state.log(step, "view_skipped", {"view": v, "error": str(outcome)})
                continue
            new_image = render_u8.copy()
            patch = new_image[crop.slices]
            patch[crop_mask] = outcome.image[crop_mask]
            dataset.replace_image(v, new_image)
        replaced.append(v)
        if state is not None:
            state.view_updated_at[v] = step
    if state is not None:
        state.log(
            step,
            "dataset_update",
            {"strength": s, "replaced": replaced, "n_views": len(dataset)},
        )
    return replaced


def clone_field(field: RadianceField) -> RadianceField:
    copy = RadianceField(field.config)
    copy.load_tensors(field.named_tensors())
    return copy


def save_job_checkpoint(
    path: str,
    config: EditJobConfig,
    field: RadianceField,
    frozen: RadianceField,
    optimizer,
    dataset: SceneDataset,
    state: JobState,
) -> None:
    save_checkpoint(
        path,
        field,
        optimizer,
        job_state=state.to_dict(),
        frozen=frozen,
        dataset_images=dataset.images(),
        extra_meta={"kind": "job", "job_config": json.loads(config.to_json())},
    )


def run_edit_job(
    config: EditJobConfig,
    dataset: SceneDataset,
    original_field: RadianceField,
    hull: VisualHull,
    backend: InpaintBackend | None = None,
    *,
    resume_from: str | None = None,
    state: JobState | None = None,
    on_progress: Callable[[JobState, RadianceField], None] | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> tuple[RadianceField, JobState]:
    """Run the full edit: update the dataset on cadence, train in between.

    Dataset updates happen before the training step at every multiple of
    n_update, the first at step 0 with strength 1. The dataset is cloned, so
    the caller's images are left alone. Fully deterministic for a fixed seed
    with the mock backend, including across checkpoint resume.
    """
    if backend is None:
        backend = parse_backend(config.backend)
    dataset = dataset.clone()
    frozen = original_field.snapshot()
    state = state or JobState()

    bundle = None
    if resume_from is not None:
        bundle = load_checkpoint(resume_from)
        working = bundle.build_field("field.")
        frozen = bundle.build_field("frozen.")
        frozen.requires_grad_(False)
        frozen.eval()
        images = bundle.dataset_images()
        if images is not None:
            for i, img in enumerate(images):
                dataset.replace_image(i, img)
        restored = JobState.from_dict(bundle.meta.get("job_state", {}))
        restored.event_sink = state.event_sink
        state = restored
        state.phase = "training"
    else:
        working = clone_field(original_field)

    optimizer = make_optimizer(working, config.lr_grid, config.lr_heads)
    if bundle is not None:
        opt_state = bundle.optimizer_state(working)
        if opt_state is not None:
            optimizer.load_state_dict(opt_state)

    weights = LossWeights(
        lambda_c=config.lambda_c,
        lambda_sigma=config.lambda_sigma,
        l_out_enabled=config.l_out_enabled,
        opacity_uses_delta=config.opacity_uses_delta,
    )
    mask_cache: dict[int, FloatMask] = {}
    start = state.step

    try:
        for n in range(start, config.n_steps):
            if should_stop is not None and should_stop():
                state.phase = "failed"
                state.log(n, "canceled", {})
                return working, state
            if n % config.n_update == 0:
                state.phase = "updating"
                s = strength_at(n, config.n_steps)
                state.last_strength = s
                update_dataset(
                    working, frozen, dataset, hull, backend, s, config,
                    step=n, state=state, mask_cache=mask_cache,
                )
                if config.reset_optimizer_on_update:
                    optimizer = make_optimizer(working, config.lr_grid, config.lr_heads)
                state.phase = "training"
                if on_progress is not None:
                    on_progress(state, working)
            batch = sample_training_batch(
                dataset, hull, config.sampling, config.batch_size,
                derive_rng(config.seed, "batch", n),
            )
            train_step(working, frozen, batch, weights, optimizer, step=n)
            state.step = n + 1
            if (
                config.checkpoint_every
                and config.checkpoint_path
                and state.step % config.checkpoint_every == 0
                and state.step < config.n_steps
            ):
                save_job_checkpoint(
                    config.checkpoint_path, config, working, frozen, optimizer, dataset, state
                )
                state.log(state.step, "checkpoint", {"path": config.checkpoint_path})
    except TrainingDivergedError:
        state.phase = "failed"
        state.log(state.step, "diverged", {})
        raise

    state.phase = "done"
    state.log(state.step, "done", {})
    if config.checkpoint_path:
        save_job_checkpoint(
            config.checkpoint_path, config, working, frozen, optimizer, dataset, state
        )
    if on_progress is not None:
        on_progress(state, working)
    return working, state


def fit_field(
    dataset: SceneDataset,
    field_config: FieldConfig | None = None,
    *,
    n_steps: int = 2000,
    batch_size: int = 1024,
    sampling: SamplingConfig | None = None,
    seed: int = 0,
    lr_grid: float = 1e-2,
    lr_heads: float = 1e-3,
    on_progress: Callable[[int, float], None] | None = None,
) -> RadianceField:
    """Train a fresh field on the dataset with the plain RGB loss."""
    if field_config is None:
        if dataset.scene_box is not None:
            lo, hi = dataset.scene_box
            field_config = FieldConfig(box_min=tuple(lo), box_max=tuple(hi))
        else:
            field_config = FieldConfig()
    if sampling is None:
        sampling = SamplingConfig(n_samples=64, near=0.5, far=5.0, jitter=True)
    field = RadianceField(field_config, init_seed=seed)
    optimizer = make_optimizer(field, lr_grid, lr_heads)
    weights = LossWeights(l_out_enabled=False)
    for n in range(n_steps):
        batch = sample_training_batch(
            dataset, None, sampling, batch_size, derive_rng(seed, "fit", n)
        )
        loss = train_step(field, None, batch, weights, optimizer, step=n)
        if on_progress is not None:
            on_progress(n, loss)
    return field
