"""Silhouette-based editable region: masks, visual hull membership, meshes."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cameras import CameraModel, look_at
from .errors import DegenerateHullWarning, InvalidInputError

# Camera-space depth below this counts as behind the camera.
_Z_EPS = 1e-9


@dataclass(frozen=True)
class MaskImage:
    """Binary silhouette bitmap tied to the camera it was drawn in."""

    width: int
    height: int
    bitmap: np.ndarray  # (H, W) bool
    camera: CameraModel | None = None

    def __post_init__(self):
        bitmap = np.asarray(self.bitmap, dtype=bool)
        if bitmap.shape != (self.height, self.width):
            raise InvalidInputError(
                f"bitmap shape {bitmap.shape} does not match {self.height}x{self.width}"
            )
        if self.camera is not None and (
            self.camera.width != self.width or self.camera.height != self.height
        ):
            raise InvalidInputError("mask dimensions do not match its camera")
        bitmap.setflags(write=False)
        object.__setattr__(self, "bitmap", bitmap)

    @classmethod
    def from_grayscale(cls, values: np.ndarray, camera: CameraModel | None = None) -> "MaskImage":
        """8-bit grayscale convention: value >= 128 means inside."""
        values = np.asarray(values)
        if values.ndim == 3:
            values = values[..., 0]
        if values.ndim != 2:
            raise InvalidInputError(f"grayscale mask must be 2D, got shape {values.shape}")
        h, w = values.shape
        return cls(width=w, height=h, bitmap=values >= 128, camera=camera)

    @property
    def n_set(self) -> int:
        return int(self.bitmap.sum())

    def to_grayscale(self) -> np.ndarray:
        return np.where(self.bitmap, 255, 0).astype(np.uint8)


class VisualHull:
    """Intersection of silhouette frustums; immutable and safe to share.

    A point belongs to the hull iff, for every silhouette, it sits in front
    of that camera, projects inside the image, and lands on a set pixel.
    """

    def __init__(self, masks: list[MaskImage]):
        if not masks:
            raise InvalidInputError("a visual hull needs at least one silhouette")
        for i, m in enumerate(masks):
            if m.camera is None:
                raise InvalidInputError(f"silhouette {i} has no camera")
            if m.n_set == 0:
                warnings.warn(
                    f"silhouette {i} has no set pixels; the hull is empty",
                    DegenerateHullWarning,
                    stacklevel=3,
                )
        self._masks = tuple(masks)
        # Flattened per-view views for the hot membership loop.
        self._params = [
            (
                m.camera.rotation,
                m.camera.position,
                m.camera.fx,
                m.camera.fy,
                m.camera.cx,
                m.camera.cy,
                m.width,
                m.height,
                m.bitmap,
            )
            for m in masks
        ]

    @property
    def masks(self) -> tuple[MaskImage, ...]:
        return self._masks

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorized membership for (N, 3) world points; returns (N,) bool."""
        pts = np.asarray(points, dtype=np.float64)
        squeeze = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInputError(f"points must be (N, 3), got {pts.shape}")
        inside = np.ones(len(pts), dtype=bool)
        for rot, pos, fx, fy, cx, cy, w, h, bitmap in self._params:
            idx = np.flatnonzero(inside)
            if idx.size == 0:
                break
            local = (pts[idx] - pos) @ rot
            z = local[:, 2]
            ok = z > _Z_EPS
            zsafe = np.where(ok, z, 1.0)
            ix = np.floor(fx * local[:, 0] / zsafe + cx).astype(np.int64)
            iy = np.floor(fy * local[:, 1] / zsafe + cy).astype(np.int64)
            ok &= (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
            hit = np.flatnonzero(ok)
            ok[hit] = bitmap[iy[hit], ix[hit]]
            inside[idx] = ok
        return inside[0] if squeeze else inside

    def __len__(self) -> int:
        return len(self._masks)


def hull_from_masks(masks: list[MaskImage]) -> VisualHull:
    return VisualHull(masks)


@dataclass(frozen=True)
class PosedMesh:
    """Triangle mesh already placed in world units."""

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        tris = np.asarray(self.triangles, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3 or not np.isfinite(verts).all():
            raise InvalidInputError("vertices must be a finite (V, 3) array")
        if tris.ndim != 2 or tris.shape[1] != 3 or len(tris) < 1:
            raise InvalidInputError("mesh needs at least one triangle")
        if tris.min() < 0 or tris.max() >= len(verts):
            raise InvalidInputError("triangle indices out of range")
        verts.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

    def transformed(self, transform: np.ndarray) -> "PosedMesh":
        """Apply a 4x4 row-major transform (rigid motion plus uniform scale)."""
        m = np.asarray(transform, dtype=np.float64)
        if m.shape != (4, 4) or not np.isfinite(m).all():
            raise InvalidInputError("transform must be a finite 4x4 matrix")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise InvalidInputError("transform last row must be [0, 0, 0, 1]")
        verts = self.vertices @ m[:3, :3].T + m[:3, 3]
        return PosedMesh(vertices=verts, triangles=self.triangles)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def parse_obj(text: str) -> PosedMesh:
    """Parse the ASCII OBJ subset: `v` and triangular `f` records only.

    Any other record kind is ignored with one warning per kind; that includes
    non-triangular faces. Face indices may be 1-based or negative-relative
    and may carry `/texture/normal` suffixes, which are dropped.
    """
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    warned: set[str] = set()

    def warn_once(kind: str, detail: str) -> None:
        if kind not in warned:
            warned.add(kind)
            warnings.warn(f"ignoring OBJ {detail}", UserWarning, stacklevel=3)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "v":
            if len(tokens) < 4:
                raise InvalidInputError(f"OBJ line {lineno}: vertex needs 3 coordinates")
            verts.append([float(t) for t in tokens[1:4]])
        elif kind == "f":
            if len(tokens) != 4:
                warn_once("f-poly", "non-triangular face records")
                continue
            idx = []
            for part in tokens[1:]:
                i = int(part.split("/", 1)[0])
                if i == 0:
                    raise InvalidInputError(f"OBJ line {lineno}: face index 0 is invalid")
                idx.append(i - 1 if i > 0 else len(verts) + i)
            tris.append(idx)
        else:
            warn_once(kind, f"'{kind}' records")

    if not tris:
        raise InvalidInputError("OBJ contains no triangular faces")
    return PosedMesh(vertices=np.array(verts), triangles=np.array(tris))


def load_mesh_obj(path, transform: np.ndarray | None = None) -> PosedMesh:
    with open(path, "r", encoding="utf-8") as fh:
        mesh = parse_obj(fh.read())
    if transform is not None:
        mesh = mesh.transformed(transform)
    return mesh


def _clip_near(tri: np.ndarray) -> list[np.ndarray]:
    """Clip one camera-space triangle against z > _Z_EPS; returns 0-2 triangles."""
    poly: list[np.ndarray] = []
    for i in range(3):
        cur, nxt = tri[i], tri[(i + 1) % 3]
        cur_in = cur[2] > _Z_EPS
        if cur_in:
            poly.append(cur)
        if cur_in != (nxt[2] > _Z_EPS):
            t = (_Z_EPS - cur[2]) / (nxt[2] - cur[2])
            poly.append(cur + t * (nxt - cur))
    if len(poly) < 3:
        return []
    if len(poly) == 3:
        return [np.stack(poly)]
    return [np.stack([poly[0], poly[1], poly[2]]), np.stack([poly[0], poly[2], poly[3]])]


def _edge_accepts(e: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    # Top-left tie rule: pixel centers exactly on a top or left edge count as
    # covered, on a bottom or right edge they do not.
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    if dy < 0 or (dy == 0 and dx > 0):
        return e >= 0
    return e > 0


def _raster_triangle(canvas: np.ndarray, tri2d: np.ndarray) -> None:
    h, w = canvas.shape
    a, b, c = tri2d
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if area2 == 0.0:
        return
    if area2 < 0.0:
        b, c = c, b
    x0 = max(0, int(np.floor(tri2d[:, 0].min())) - 1)
    x1 = min(w - 1, int(np.ceil(tri2d[:, 0].max())) + 1)
    y0 = max(0, int(np.floor(tri2d[:, 1].min())) - 1)
    y1 = min(h - 1, int(np.ceil(tri2d[:, 1].max())) + 1)
    if x0 > x1 or y0 > y1:
        return
    px = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
    py = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(px, py)
    covered = np.ones(gx.shape, dtype=bool)
    for p0, p1 in ((a, b), (b, c), (c, a)):
        e = (p1[0] - p0[0]) * (gy - p0[1]) - (p1[1] - p0[1]) * (gx - p0[0])
        covered &= _edge_accepts(e, p0, p1)
        if not covered.any():
            return
    canvas[y0 : y1 + 1, x0 : x1 + 1] |= covered


def silhouettes_from_mesh(
    mesh: PosedMesh,
    cameras: list[CameraModel],
    resolution: int | None = None,
) -> list[MaskImage]:
    """Rasterize the mesh's coverage into each camera; no backface culling.

    A pixel is set iff its center is covered by any triangle part in front of
    the camera. A camera that sees the mesh entirely behind it gets an
    all-clear mask plus a warning.
    """
    if not cameras:
        raise InvalidInputError("silhouettes_from_mesh needs at least one camera")
    masks = []
    for cam in cameras:
        if resolution is not None:
            cam = cam.scaled(resolution, resolution)
        verts_cam = cam.world_to_camera(mesh.vertices)
        canvas = np.zeros((cam.height, cam.width), dtype=bool)
        any_front = False
        for tri_idx in mesh.triangles:
            tri = verts_cam[tri_idx]
            for part in _clip_near(tri):
                any_front = True
                z = part[:, 2]
                uv = np.stack(
                    [
                        cam.fx * part[:, 0] / z + cam.cx,
                        cam.fy * part[:, 1] / z + cam.cy,
                    ],
                    axis=-1,
                )
                _raster_triangle(canvas, uv)
        if not any_front:
            warnings.warn(
                "mesh is entirely behind the camera; silhouette is empty",
                DegenerateHullWarning,
                stacklevel=2,
            )
        masks.append(MaskImage(width=cam.width, height=cam.height, bitmap=canvas, camera=cam))
    return masks


def axis_aligned_cameras(
    center,
    distance: float,
    *,
    width: int = 256,
    height: int = 256,
    focal: float | None = None,
) -> list[CameraModel]:
    """Six virtual cameras on the +-x/+-y/+-z axes looking at center.

    Default rig for building a hull from a mesh when no annotated views exist.
    """
    center = np.asarray(center, dtype=np.float64)
    if focal is None:
        focal = float(width)
    cams = []
    for axis in range(3):
        for sign in (1.0, -1.0):
            eye = center.copy()
            eye[axis] += sign * distance
            up = (0.0, 0.0, 1.0) if axis != 2 else (0.0, 1.0, 0.0)
            cams.append(
                look_at(eye, center, up, width=width, height=height, focal=focal)
            )
    return cams


def hull_from_mesh(
    mesh: PosedMesh,
    cameras: list[CameraModel] | None = None,
    resolution: int = 256,
    distance_factor: float = 4.0,
) -> VisualHull:
    """Build a hull by rasterizing the mesh into the given or default cameras."""
    if cameras is None:
        lo, hi = mesh.bounds()
        center = (lo + hi) / 2.0
        radius = float(np.linalg.norm(hi - lo)) / 2.0
        if radius == 0.0:
            raise InvalidInputError("mesh is degenerate (zero extent)")
        cameras = axis_aligned_cameras(
            center, distance_factor * radius, width=resolution, height=resolution
        )
    return VisualHull(silhouettes_from_mesh(mesh, cameras))
