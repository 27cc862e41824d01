"""HTTP surface for annotation and job control, backing the browser UI."""

from __future__ import annotations

import os
import threading
import uuid
from typing import Callable

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import HTMLResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine import EditJobConfig, JobState, desk_profile, run_edit_job
from .errors import InvalidInputError
from .fields import RadianceField
from .hull import MaskImage, VisualHull, hull_from_mesh, parse_obj
from .imagecodec import png_b64_decode, png_b64_encode, png_encode, float_to_image
from .maskproj import render_hull_mask
from .rendering import SamplingConfig, render_view
from .sceneio import SceneDataset

EVENTS_TAIL = 50


class MaskUpload(BaseModel):
    view: int
    mask: str  # base64 PNG, value >= 128 means inside


class HullSpec(BaseModel):
    mask_ids: list[str] | None = None
    mesh: str | None = None  # base64 ASCII OBJ
    transform: list[float] | None = None  # 16 row-major numbers


class JobRequest(HullSpec):
    n_steps: int | None = None
    n_update: int | None = None
    lambda_c: float | None = None
    lambda_sigma: float | None = None
    dilation_diameter: int | None = None
    crop_interval: list[float] | None = None
    prompt: str | None = None
    backend: str | None = None
    seed: int | None = None
    l_out_enabled: bool | None = None
    batch_size: int | None = None


class JobRuntime:
    """One edit job on a worker thread, with snapshot-based previews."""

    def __init__(self, job_id: str, config: EditJobConfig, hull: VisualHull, app_state):
        self.id = job_id
        self.config = config
        self.hull = hull
        self.app_state = app_state
        self.state = JobState()
        self.stop_event = threading.Event()
        self.error: str | None = None
        self.lock = threading.Lock()
        self.snapshot_tensors: dict[str, np.ndarray] | None = None
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _on_progress(self, state: JobState, field: RadianceField) -> None:
        tensors = {k: v.copy() for k, v in field.named_tensors().items()}
        with self.lock:
            self.snapshot_tensors = tensors

    def _run(self) -> None:
        try:
            run_edit_job(
                self.config,
                self.app_state.dataset,
                self.app_state.field,
                self.hull,
                state=self.state,
                on_progress=self._on_progress,
                should_stop=self.stop_event.is_set,
            )
        except Exception as exc:  # job thread must not die silently
            self.error = str(exc)
            self.state.phase = "failed"

    def start(self) -> None:
        self.thread.start()

    @property
    def running(self) -> bool:
        return self.thread.is_alive()

    def snapshot_field(self) -> RadianceField | None:
        with self.lock:
            tensors = self.snapshot_tensors
        if tensors is None:
            return None
        field = RadianceField(self.app_state.field.config)
        field.load_tensors(tensors)
        return field

    def status(self) -> dict:
        return {
            "id": self.id,
            "phase": self.state.phase,
            "step": self.state.step,
            "strength": self.state.last_strength,
            "error": self.error,
            "events_tail": self.state.events[-EVENTS_TAIL:],
        }


class AppState:
    def __init__(self, dataset: SceneDataset, field: RadianceField, sampling: SamplingConfig):
        self.dataset = dataset
        self.field = field.snapshot()
        self.sampling = sampling
        self.masks: dict[str, tuple[int, MaskImage]] = {}
        self.jobs: dict[str, JobRuntime] = {}
        self.render_cache: dict[int, bytes] = {}
        self.request_cache: dict[str, tuple[int, dict]] = {}
        self.lock = threading.Lock()

    def active_job(self) -> JobRuntime | None:
        for job in self.jobs.values():
            if job.running:
                return job
        return None

    def build_hull(self, spec: HullSpec) -> VisualHull:
        if spec.mask_ids:
            masks = []
            for mask_id in spec.mask_ids:
                if mask_id not in self.masks:
                    raise InvalidInputError(f"unknown mask id '{mask_id}'")
                masks.append(self.masks[mask_id][1])
            return VisualHull(masks)
        if spec.mesh:
            import base64

            try:
                text = base64.b64decode(spec.mesh).decode("utf-8")
            except Exception as exc:
                raise InvalidInputError(f"mesh is not base64 OBJ text: {exc}") from exc
            mesh = parse_obj(text)
            if spec.transform is not None:
                if len(spec.transform) != 16:
                    raise InvalidInputError("transform must hold 16 row-major numbers")
                mesh = mesh.transformed(np.asarray(spec.transform).reshape(4, 4))
            return hull_from_mesh(mesh)
        raise InvalidInputError("hull needs mask_ids or a mesh")


def _idempotent(state: AppState, request: Request, build: Callable[[], tuple[int, dict]]):
    key = request.headers.get("X-Request-Id")
    if key:
        with state.lock:
            cached = state.request_cache.get(key)
        if cached is not None:
            return JSONResponse(cached[1], status_code=cached[0])
    status, payload = build()
    if key:
        with state.lock:
            state.request_cache[key] = (status, payload)
    return JSONResponse(payload, status_code=status)


def create_app(
    dataset: SceneDataset,
    field: RadianceField,
    *,
    sampling: SamplingConfig | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    if sampling is None:
        sampling = SamplingConfig(n_samples=64, near=0.5, far=5.0)
    state = AppState(dataset, field, sampling)
    app = FastAPI(title="hullpaint")
    app.state.hullpaint = state

    def get_camera(view: int):
        if not 0 <= view < len(state.dataset):
            raise HTTPException(status_code=404, detail=f"unknown view {view}")
        return state.dataset.entries[view].camera

    @app.get("/api/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/api/views")
    def views():
        return {
            "views": [
                {"id": i, "width": e.camera.width, "height": e.camera.height, "file": e.file}
                for i, e in enumerate(state.dataset.entries)
            ]
        }

    @app.get("/api/render")
    def render(view: int, stage: str = "original"):
        camera = get_camera(view)
        if stage == "original":
            with state.lock:
                cached = state.render_cache.get(view)
            if cached is None:
                img = render_view(state.field, camera, state.sampling)
                cached = png_encode(float_to_image(img))
                with state.lock:
                    state.render_cache[view] = cached
            return Response(content=cached, media_type="image/png")
        if stage == "edited":
            job = _latest_job(state)
            if job is None:
                raise HTTPException(status_code=404, detail="no edit job has run")
            snap = job.snapshot_field()
            if snap is None:
                raise HTTPException(status_code=404, detail="no snapshot available yet")
            img = render_view(snap, camera, state.sampling)
            return Response(content=png_encode(float_to_image(img)), media_type="image/png")
        raise HTTPException(status_code=422, detail="stage must be 'original' or 'edited'")

    @app.post("/api/masks")
    def upload_mask(body: MaskUpload, request: Request):
        def build():
            camera = get_camera(body.view)
            try:
                values = png_b64_decode(body.mask)
                mask = MaskImage.from_grayscale(values, camera)
            except InvalidInputError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            mask_id = uuid.uuid4().hex[:12]
            with state.lock:
                state.masks[mask_id] = (body.view, mask)
            return 200, {"id": mask_id}

        return _idempotent(state, request, build)

    @app.delete("/api/masks/{mask_id}")
    def delete_mask(mask_id: str, request: Request):
        def build():
            with state.lock:
                if mask_id not in state.masks:
                    raise HTTPException(status_code=404, detail=f"unknown mask id '{mask_id}'")
                del state.masks[mask_id]
            return 200, {"status": "deleted"}

        return _idempotent(state, request, build)

    @app.post("/api/hull/preview")
    def hull_preview(body: HullSpec):
        try:
            hull = state.build_hull(body)
        except InvalidInputError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        out = []
        for i, entry in enumerate(state.dataset.entries):
            fmask = render_hull_mask(hull, state.field, entry.camera, state.sampling)
            out.append({"view": i, "mask": png_b64_encode(fmask.to_grayscale())})
        return {"views": out}

    @app.post("/api/jobs")
    def create_job(body: JobRequest, request: Request):
        def build():
            with state.lock:
                if state.active_job() is not None:
                    raise HTTPException(status_code=409, detail="an edit job is already running")
                try:
                    hull = state.build_hull(body)
                    overrides = {
                        k: v
                        for k, v in {
                            "n_steps": body.n_steps,
                            "n_update": body.n_update,
                            "lambda_c": body.lambda_c,
                            "lambda_sigma": body.lambda_sigma,
                            "dilation_diameter": body.dilation_diameter,
                            "prompt": body.prompt,
                            "backend": body.backend,
                            "seed": body.seed,
                            "l_out_enabled": body.l_out_enabled,
                            "batch_size": body.batch_size,
                        }.items()
                        if v is not None
                    }
                    if body.crop_interval is not None:
                        overrides["crop_interval"] = tuple(body.crop_interval)
                    config = desk_profile(**overrides)
                except (InvalidInputError, TypeError) as exc:
                    raise HTTPException(status_code=422, detail=str(exc)) from exc
                job = JobRuntime(uuid.uuid4().hex[:12], config, hull, state)
                state.jobs[job.id] = job
                job.start()
            return 200, {"id": job.id}

        return _idempotent(state, request, build)

    def get_job(job_id: str) -> JobRuntime:
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job id '{job_id}'")
        return job

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        return get_job(job_id).status()

    @app.get("/api/jobs/{job_id}/preview")
    def job_preview(job_id: str, view: int):
        job = get_job(job_id)
        camera = get_camera(view)
        snap = job.snapshot_field()
        if snap is None:
            raise HTTPException(status_code=404, detail="no snapshot available yet")
        img = render_view(snap, camera, state.sampling)
        return Response(content=png_encode(float_to_image(img)), media_type="image/png")

    @app.delete("/api/jobs/{job_id}")
    def cancel_job(job_id: str, request: Request):
        def build():
            job = get_job(job_id)
            job.stop_event.set()
            return 200, {"status": "canceling"}

        return _idempotent(state, request, build)

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return (
                "<!doctype html><title>hullpaint</title>"
                "<h1>hullpaint service</h1>"
                "<p>No UI bundle found. The JSON API lives under <code>/api/</code>.</p>"
            )

    return app


def _latest_job(state: AppState) -> JobRuntime | None:
    if not state.jobs:
        return None
    return list(state.jobs.values())[-1]
