"""Scene persistence: manifests, images, checkpoints, synthetic fixtures."""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import torch

from .cameras import CameraModel, look_at
from .errors import (
    CorruptCheckpointError,
    IncompatibleCheckpointError,
    InvalidInputError,
    ManifestError,
    ValidationError,
)
from .fields import FieldConfig, RadianceField
from .hull import MaskImage
from .imagecodec import png_decode, png_encode

CHECKPOINT_MAGIC = b"NRFI"
CHECKPOINT_VERSION = 1

_CAMERA_FIELDS = ("file", "width", "height", "fx", "fy", "cx", "cy", "c2w")


@dataclass
class SceneEntry:
    camera: CameraModel
    image: np.ndarray  # (H, W, 3) uint8, mutable current training image
    file: str | None = None


@dataclass
class SceneDataset:
    """Posed training images; the image arrays are the mutable editing target."""

    entries: list[SceneEntry]
    scene_box: tuple[np.ndarray, np.ndarray] | None = None
    base_dir: str = "."

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def cameras(self) -> list[CameraModel]:
        return [e.camera for e in self.entries]

    def images(self) -> list[np.ndarray]:
        return [e.image for e in self.entries]

    def replace_image(self, index: int, image: np.ndarray) -> None:
        entry = self.entries[index]
        image = np.asarray(image)
        if image.dtype != np.uint8 or image.shape != entry.image.shape:
            raise InvalidInputError(
                f"replacement image for view {index} must be uint8 {entry.image.shape}"
            )
        entry.image = image.copy()

    def clone(self) -> "SceneDataset":
        """Cameras shared, image buffers copied."""
        return SceneDataset(
            entries=[
                SceneEntry(camera=e.camera, image=e.image.copy(), file=e.file)
                for e in self.entries
            ],
            scene_box=self.scene_box,
            base_dir=self.base_dir,
        )


def _require(entry: dict, key: str, index: int):
    if key not in entry:
        raise ManifestError(f"camera {index}: missing required field '{key}'")
    return entry[key]


def _camera_from_manifest(entry: dict, index: int) -> CameraModel:
    values = {key: _require(entry, key, index) for key in _CAMERA_FIELDS}
    c2w = np.asarray(values["c2w"], dtype=np.float64)
    if c2w.shape != (16,):
        raise ManifestError(f"camera {index}: c2w must hold 16 row-major numbers")
    c2w = c2w.reshape(4, 4)
    rot = c2w[:3, :3]
    err = float(np.abs(rot @ rot.T - np.eye(3)).max())
    if err > 1e-4:
        raise ValidationError(
            f"camera {index}: rotation is not orthonormal (error {err:.2e} > 1e-4)"
        )
    if err > 1e-7:
        # Mild drift from serialized poses: snap to the nearest rotation.
        u, _, vt = np.linalg.svd(rot)
        fixed = u @ vt
        if np.linalg.det(fixed) < 0:
            raise ValidationError(f"camera {index}: rotation block is a reflection")
        c2w = c2w.copy()
        c2w[:3, :3] = fixed
    try:
        return CameraModel(
            width=int(values["width"]),
            height=int(values["height"]),
            fx=float(values["fx"]),
            fy=float(values["fy"]),
            cx=float(values["cx"]),
            cy=float(values["cy"]),
            c2w=c2w,
        )
    except InvalidInputError as exc:
        raise ValidationError(f"camera {index}: {exc}") from exc


def load_manifest(path: str) -> SceneDataset:
    """Read a camera manifest and its images; paths resolve next to the file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    if "cameras" not in doc or not isinstance(doc["cameras"], list):
        raise ManifestError("manifest: missing required field 'cameras'")
    base_dir = os.path.dirname(os.path.abspath(path))
    entries = []
    for i, cam_entry in enumerate(doc["cameras"]):
        camera = _camera_from_manifest(cam_entry, i)
        file_name = cam_entry["file"]
        img_path = os.path.join(base_dir, file_name)
        try:
            with open(img_path, "rb") as img_fh:
                image = png_decode(img_fh.read())
        except OSError as exc:
            raise ManifestError(f"camera {i}: cannot read image '{file_name}': {exc}") from exc
        if image.ndim == 2:
            image = np.repeat(image[:, :, None], 3, axis=2)
        if image.shape[:2] != (camera.height, camera.width):
            raise ValidationError(
                f"entry {i} ('{file_name}'): image is {image.shape[1]}x{image.shape[0]}, "
                f"camera expects {camera.width}x{camera.height}"
            )
        entries.append(SceneEntry(camera=camera, image=image, file=file_name))
    scene_box = None
    if "scene_box" in doc and doc["scene_box"] is not None:
        box = doc["scene_box"]
        if "min" not in box or "max" not in box:
            raise ManifestError("scene_box: missing required field 'min'/'max'")
        lo = np.asarray(box["min"], dtype=np.float64)
        hi = np.asarray(box["max"], dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,) or not (lo < hi).all():
            raise ValidationError("scene_box must satisfy min < max componentwise")
        scene_box = (lo, hi)
    return SceneDataset(entries=entries, scene_box=scene_box, base_dir=base_dir)


def save_manifest(dataset: SceneDataset, path: str, *, write_images: bool = True) -> None:
    """Write the manifest JSON and (by default) the current images beside it."""
    base_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(base_dir, exist_ok=True)
    cameras = []
    for i, entry in enumerate(dataset.entries):
        file_name = entry.file or f"view_{i:04d}.png"
        entry.file = file_name
        cam = entry.camera
        cameras.append(
            {
                "file": file_name,
                "width": cam.width,
                "height": cam.height,
                "fx": cam.fx,
                "fy": cam.fy,
                "cx": cam.cx,
                "cy": cam.cy,
                "c2w": [float(v) for v in cam.c2w.reshape(-1)],
            }
        )
        if write_images:
            img_path = os.path.join(base_dir, file_name)
            os.makedirs(os.path.dirname(img_path) or ".", exist_ok=True)
            with open(img_path, "wb") as fh:
                fh.write(png_encode(entry.image))
    doc: dict = {"cameras": cameras}
    if dataset.scene_box is not None:
        lo, hi = dataset.scene_box
        doc["scene_box"] = {"min": [float(v) for v in lo], "max": [float(v) for v in hi]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_mask_png(path: str, camera: CameraModel | None = None) -> MaskImage:
    with open(path, "rb") as fh:
        values = png_decode(fh.read())
    return MaskImage.from_grayscale(values, camera)


# --- checkpoint container ---------------------------------------------------


def write_container(path: str, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Byte-stable container: magic, version, JSON manifest, little-endian f32."""
    names = sorted(tensors)
    arrays = {}
    manifest_tensors = []
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        arrays[name] = arr
        manifest_tensors.append({"name": name, "shape": list(arr.shape)})
    manifest = json.dumps(
        {"meta": meta, "tensors": manifest_tensors},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for name in names:
            fh.write(arrays[name].tobytes())


def read_container(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise CorruptCheckpointError(f"checkpoint is truncated ({len(data)} bytes)")
    if data[:4] != CHECKPOINT_MAGIC:
        raise IncompatibleCheckpointError(
            f"bad magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}"
        )
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise IncompatibleCheckpointError(
            f"checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
        )
    (manifest_len,) = struct.unpack_from("<Q", data, 8)
    header_end = 16 + manifest_len
    if len(data) < header_end:
        raise CorruptCheckpointError("checkpoint manifest is truncated")
    try:
        manifest = json.loads(data[16:header_end].decode("utf-8"))
        entries = manifest["tensors"]
        meta = manifest["meta"]
    except (ValueError, KeyError) as exc:
        raise CorruptCheckpointError(f"checkpoint manifest is invalid: {exc}") from exc
    tensors = {}
    offset = header_end
    for entry in entries:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if len(data) < end:
            raise CorruptCheckpointError(
                f"checkpoint data is truncated (tensor {entry['name']!r})"
            )
        arr = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape)
        tensors[entry["name"]] = arr.copy()
        offset = end
    return tensors, meta


@dataclass
class CheckpointBundle:
    tensors: dict[str, np.ndarray]
    meta: dict

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        return {
            name[len(prefix) :]: arr
            for name, arr in self.tensors.items()
            if name.startswith(prefix)
        }

    def build_field(self, prefix: str = "field.") -> RadianceField:
        config = FieldConfig.from_json(json.dumps(self.meta["field_config"]))
        field = RadianceField(config)
        field.load_tensors(self.group(prefix))
        return field

    def dataset_images(self) -> list[np.ndarray] | None:
        group = self.group("image.")
        if not group:
            return None
        images = []
        for i in range(len(group)):
            key = f"{i:04d}"
            if key not in group:
                raise CorruptCheckpointError(f"checkpoint missing dataset image {i}")
            images.append(np.round(group[key]).astype(np.uint8))
        return images

    def optimizer_state(self, field: RadianceField) -> dict | None:
        if "param_groups" not in self.meta:
            return None
        group = self.group("opt.")
        state: dict[int, dict] = {}
        for name, arr in group.items():
            idx_str, key = name.split(".", 1)
            tensor = torch.from_numpy(arr)
            if key == "step":
                tensor = tensor.reshape(())
            state.setdefault(int(idx_str), {})[key] = tensor
        param_groups = json.loads(json.dumps(self.meta["param_groups"]))
        return {"state": state, "param_groups": param_groups}


def save_checkpoint(
    path: str,
    field: RadianceField,
    optimizer: torch.optim.Optimizer | None = None,
    job_state: dict | None = None,
    *,
    frozen: RadianceField | None = None,
    dataset_images: list[np.ndarray] | None = None,
    extra_meta: dict | None = None,
) -> None:
    """Bundle everything needed to continue training bit-identically."""
    tensors: dict[str, np.ndarray] = {
        f"field.{name}": arr for name, arr in field.named_tensors().items()
    }
    meta: dict = {"field_config": json.loads(field.config.to_json())}
    if frozen is not None:
        tensors.update({f"frozen.{name}": arr for name, arr in frozen.named_tensors().items()})
    if dataset_images is not None:
        for i, img in enumerate(dataset_images):
            tensors[f"image.{i:04d}"] = np.asarray(img, dtype=np.float32)
    if optimizer is not None:
        sd = optimizer.state_dict()
        for idx, entry in sd["state"].items():
            for key, value in entry.items():
                arr = value.detach().cpu().float().numpy()
                tensors[f"opt.{idx}.{key}"] = np.atleast_1d(arr)
        meta["param_groups"] = sd["param_groups"]
    if job_state is not None:
        meta["job_state"] = job_state
    if extra_meta:
        meta.update(extra_meta)
    write_container(path, tensors, meta)


def load_checkpoint(path: str) -> CheckpointBundle:
    tensors, meta = read_container(path)
    return CheckpointBundle(tensors=tensors, meta=meta)


# --- synthetic fixtures -----------------------------------------------------

_EPS = 1e-9


@dataclass
class Primitive:
    kind: str  # "sphere" | "box" | "checker_floor"
    params: dict
    color: np.ndarray | None = None  # flat color; checker floor computes its own


@dataclass
class AnalyticScene:
    """Exact geometry behind a synthetic dataset, for oracles and stand-ins."""

    kind: str
    primitives: list[Primitive]
    cameras: list[CameraModel]
    scene_box: tuple[np.ndarray, np.ndarray]
    detail: dict = dataclass_field(default_factory=dict)

    def render_camera(self, camera: CameraModel) -> np.ndarray:
        origins, dirs = camera.ray_grid()
        n = len(origins)
        best_t = np.full(n, np.inf)
        color = np.zeros((n, 3))
        for prim in self.primitives:
            t, c = _intersect(prim, origins, dirs)
            closer = t < best_t
            best_t = np.where(closer, t, best_t)
            color[closer] = c[closer]
        img = color.reshape(camera.height, camera.width, 3)
        return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)

    def density_field(self, sigma: float = 1e4) -> "AnalyticDensityField":
        return AnalyticDensityField(self.primitives, sigma)


class AnalyticDensityField:
    """query_np-compatible stand-in: constant density inside solid primitives."""

    def __init__(self, primitives: list[Primitive], sigma: float):
        self.primitives = primitives
        self.sigma = sigma

    def query_np(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(points, dtype=np.float64)
        inside = np.zeros(len(pts), dtype=bool)
        color = np.zeros((len(pts), 3))
        for prim in self.primitives:
            member = _contains(prim, pts) & ~inside
            inside |= member
            if prim.color is not None:
                color[member] = prim.color
        return inside.astype(np.float64) * self.sigma, color


def _intersect(prim: Primitive, origins: np.ndarray, dirs: np.ndarray):
    n = len(origins)
    t = np.full(n, np.inf)
    color = np.zeros((n, 3))
    if prim.kind == "sphere":
        center = np.asarray(prim.params["center"])
        r = prim.params["radius"]
        oc = origins - center
        b = np.einsum("ij,ij->i", dirs, oc)
        disc = b * b - (np.einsum("ij,ij->i", oc, oc) - r * r)
        hit = disc >= 0.0
        root = np.sqrt(np.where(hit, disc, 0.0))
        t_hit = -b - root
        hit &= t_hit > _EPS
        t[hit] = t_hit[hit]
        color[hit] = prim.color
    elif prim.kind == "box":
        lo = np.asarray(prim.params["min"])
        hi = np.asarray(prim.params["max"])
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (lo - origins) / dirs
            t1 = (hi - origins) / dirs
        tn = np.nanmax(np.minimum(t0, t1), axis=1)
        tf = np.nanmin(np.maximum(t0, t1), axis=1)
        hit = (tf >= tn) & (tn > _EPS)
        t[hit] = tn[hit]
        if "face_colors" in prim.params:
            entry = np.minimum(t0, t1)
            axis = np.argmax(np.where(np.isnan(entry), -np.inf, entry), axis=1)
            face = axis * 2 + (dirs[np.arange(n), axis] < 0)
            colors = np.asarray(prim.params["face_colors"])
            color[hit] = colors[face[hit]]
        else:
            color[hit] = prim.color
    elif prim.kind == "checker_floor":
        z = prim.params["z"]
        half = prim.params["half_extent"]
        cell = prim.params["cell"]
        dz = dirs[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hit = (z - origins[:, 2]) / dz
        safe_t = np.where(np.abs(dz) > _EPS, t_hit, -1.0)
        pt = origins + safe_t[:, None] * dirs
        hit = (
            (safe_t > _EPS)
            & (np.abs(pt[:, 0]) <= half)
            & (np.abs(pt[:, 1]) <= half)
        )
        parity = (
            np.floor(pt[hit, 0] / cell).astype(np.int64)
            + np.floor(pt[hit, 1] / cell).astype(np.int64)
        ) % 2
        c0 = np.asarray(prim.params["color_a"])
        c1 = np.asarray(prim.params["color_b"])
        t[hit] = safe_t[hit]
        color[hit] = np.where(parity[:, None] == 0, c0, c1)
    else:
        raise InvalidInputError(f"unknown primitive kind '{prim.kind}'")
    return t, color


def _contains(prim: Primitive, pts: np.ndarray) -> np.ndarray:
    if prim.kind == "sphere":
        center = np.asarray(prim.params["center"])
        r = prim.params["radius"]
        return np.einsum("ij,ij->i", pts - center, pts - center) <= r * r
    if prim.kind == "box":
        lo = np.asarray(prim.params["min"])
        hi = np.asarray(prim.params["max"])
        return ((pts >= lo) & (pts <= hi)).all(axis=1)
    if prim.kind == "checker_floor":
        z = prim.params["z"]
        half = prim.params["half_extent"]
        thickness = prim.params.get("thickness", 0.04)
        return (
            (np.abs(pts[:, 2] - z) <= thickness / 2.0)
            & (np.abs(pts[:, 0]) <= half)
            & (np.abs(pts[:, 1]) <= half)
        )
    raise InvalidInputError(f"unknown primitive kind '{prim.kind}'")


def orbit_cameras(
    n_views: int,
    *,
    radius: float = 2.5,
    elevations_deg: tuple[float, ...] = (18.0, 32.0, 46.0),
    width: int = 64,
    height: int = 64,
    focal: float | None = None,
    target=(0.0, 0.0, 0.0),
) -> list[CameraModel]:
    """Evenly spaced azimuths at cycling elevations, all looking at the target."""
    if focal is None:
        focal = 1.1 * width
    target = np.asarray(target, dtype=np.float64)
    cams = []
    for k in range(n_views):
        azim = 2.0 * np.pi * k / n_views
        elev = np.deg2rad(elevations_deg[k % len(elevations_deg)])
        eye = target + radius * np.array(
            [np.cos(azim) * np.cos(elev), np.sin(azim) * np.cos(elev), np.sin(elev)]
        )
        cams.append(look_at(eye, target, (0.0, 0.0, 1.0), width=width, height=height, focal=focal))
    return cams


def sphere_silhouette(camera: CameraModel, center, radius: float) -> MaskImage:
    """Exact projected disc: pixel set iff its center ray intersects the sphere."""
    origins, dirs = camera.ray_grid()
    center = np.asarray(center, dtype=np.float64)
    oc = origins - center
    b = np.einsum("ij,ij->i", dirs, oc)
    disc = b * b - (np.einsum("ij,ij->i", oc, oc) - radius * radius)
    hit = (disc >= 0.0) & (-b > 0.0)
    bitmap = hit.reshape(camera.height, camera.width)
    return MaskImage(width=camera.width, height=camera.height, bitmap=bitmap, camera=camera)


def generate_synthetic_scene(
    spec: str,
    seed: int = 0,
    *,
    n_views: int = 20,
    width: int = 64,
    height: int = 64,
    radius: float = 2.5,
) -> tuple[SceneDataset, AnalyticScene]:
    """Desk-scale posed datasets with exact geometry for oracle checks.

    Specs: "sphere-in-box" (matte sphere over a checkered base), "slab-occluder"
    (an opaque wall with one blocked and one clear camera, listed first in that
    order), "textured-box" (a cube with six distinct face colors).
    """
    del seed  # the rigs and renders are fully deterministic
    box = (np.array([-1.2, -1.2, -1.2]), np.array([1.2, 1.2, 1.2]))
    if spec == "sphere-in-box":
        primitives = [
            Primitive(
                kind="sphere",
                params={"center": [0.0, 0.0, 0.0], "radius": 0.4},
                color=np.array([0.2, 0.35, 0.85]),
            ),
            Primitive(
                kind="checker_floor",
                params={
                    "z": -0.45,
                    "half_extent": 1.0,
                    "cell": 0.25,
                    "color_a": [0.65, 0.6, 0.55],
                    "color_b": [0.25, 0.3, 0.35],
                },
            ),
        ]
        cameras = orbit_cameras(n_views, radius=radius, width=width, height=height)
        detail = {"sphere_center": [0.0, 0.0, 0.0], "sphere_radius": 0.4}
    elif spec == "slab-occluder":
        lo = np.array([-0.8, 0.35, -0.8])
        hi = np.array([0.8, 0.45, 0.8])
        primitives = [
            Primitive(kind="box", params={"min": lo, "max": hi}, color=np.array([0.6, 0.6, 0.6]))
        ]
        blocked = look_at(
            (0.0, 2.5, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0),
            width=width, height=height, focal=1.1 * width,
        )
        clear = look_at(
            (0.0, -2.5, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0),
            width=width, height=height, focal=1.1 * width,
        )
        cameras = [blocked, clear]
        cameras += orbit_cameras(max(n_views - 2, 0), radius=radius, width=width, height=height)
        # Half-space form a*x + b*y + c*z <= d, one row per slab face.
        planes = []
        for axis in range(3):
            for sign, bound in ((1.0, hi[axis]), (-1.0, lo[axis])):
                normal = [0.0, 0.0, 0.0]
                normal[axis] = sign
                planes.append(normal + [sign * bound])
        detail = {"slab_min": lo.tolist(), "slab_max": hi.tolist(), "slab_planes": planes}
    elif spec == "textured-box":
        face_colors = np.array(
            [
                [0.9, 0.2, 0.2],
                [0.2, 0.9, 0.2],
                [0.2, 0.2, 0.9],
                [0.9, 0.9, 0.2],
                [0.9, 0.2, 0.9],
                [0.2, 0.9, 0.9],
            ]
        )
        primitives = [
            Primitive(
                kind="box",
                params={
                    "min": np.array([-0.4, -0.4, -0.4]),
                    "max": np.array([0.4, 0.4, 0.4]),
                    "face_colors": face_colors,
                },
            )
        ]
        cameras = orbit_cameras(n_views, radius=radius, width=width, height=height)
        detail = {"face_colors": face_colors.tolist()}
    else:
        raise InvalidInputError(f"unknown synthetic scene spec '{spec}'")

    scene = AnalyticScene(
        kind=spec, primitives=primitives, cameras=cameras, scene_box=box, detail=detail
    )
    entries = [
        SceneEntry(camera=cam, image=scene.render_camera(cam), file=None) for cam in cameras
    ]
    dataset = SceneDataset(entries=entries, scene_box=box)
    return dataset, scene
