"""Reprojects the hull into views as occlusion-aware masks and preps them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy import ndimage

from .cameras import CameraModel
from .errors import InvalidInputError, NoRegionError
from .hull import MaskImage, VisualHull
from .rendering import SamplingConfig, composite, stratified_t
from .rngutil import derive_rng

# Density assigned inside the hull when rendering its silhouette: effectively
# opaque within one sample spacing at scene scales around a world unit.
SIGMA_IN = 1e4


@dataclass(frozen=True)
class FloatMask:
    """Soft [0,1] mask as rendered; camera kept for downstream binarization."""

    width: int
    height: int
    values: np.ndarray  # (H, W) float64 in [0, 1]
    camera: CameraModel | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise InvalidInputError(
                f"values shape {vals.shape} does not match {self.height}x{self.width}"
            )
        if not np.isfinite(vals).all():
            raise InvalidInputError("mask values must be finite")
        vals = np.clip(vals, 0.0, 1.0)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def to_grayscale(self) -> np.ndarray:
        return np.round(255.0 * self.values).astype(np.uint8)


@dataclass(frozen=True)
class CropRect:
    """Square pixel window; construction does not know the image, callers clamp."""

    x: int
    y: int
    side: int

    def __post_init__(self):
        if self.side < 1 or self.x < 0 or self.y < 0:
            raise InvalidInputError(f"invalid crop rect {self}")

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.side), slice(self.x, self.x + self.side)


def render_hull_mask(
    hull: VisualHull,
    frozen,
    camera: CameraModel,
    sampling: SamplingConfig | None = None,
    *,
    sigma_in: float = SIGMA_IN,
    chunk: int = 4096,
) -> FloatMask:
    """Volume-render the hull silhouette from a camera, occluded by the scene.

    Inside the hull the composite field is opaque white; outside it keeps the
    frozen field's density with black radiance, so existing geometry in front
    of the hull darkens the mask. `frozen` needs a query_np(points) method
    returning (density, color); only density is used.
    """
    if sampling is None:
        sampling = SamplingConfig()
    origins, dirs = camera.ray_grid()
    n_rays = len(origins)
    out = np.zeros(n_rays, dtype=np.float64)
    t, delta = stratified_t(sampling.near, sampling.far, sampling.n_samples, 1)
    t, delta = t[0], delta[0]
    for start in range(0, n_rays, chunk):
        o = origins[start : start + chunk]
        d = dirs[start : start + chunk]
        positions = o[:, None, :] + t[None, :, None] * d[:, None, :]
        flat = positions.reshape(-1, 3)
        member = hull.contains(flat)
        frozen_sigma, _ = frozen.query_np(flat)
        sigma = np.where(member, sigma_in, frozen_sigma)
        shape = positions.shape[:2]
        lum = member.astype(np.float64).reshape(*shape, 1)
        color = np.broadcast_to(lum, (*shape, 3))
        pixel, _, _ = composite(
            torch.from_numpy(sigma.reshape(shape)),
            torch.from_numpy(np.ascontiguousarray(color)),
            torch.from_numpy(np.broadcast_to(delta, shape).copy()),
        )
        out[start : start + chunk] = pixel[:, 0].numpy()
    values = out.reshape(camera.height, camera.width)
    return FloatMask(width=camera.width, height=camera.height, values=values, camera=camera)


def binarize(mask: FloatMask, threshold: float = 0.5) -> MaskImage:
    """Closed threshold: a pixel exactly at the threshold counts as set."""
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"threshold must be in (0, 1), got {threshold}")
    return MaskImage(
        width=mask.width,
        height=mask.height,
        bitmap=mask.values >= threshold,
        camera=mask.camera,
    )


def disc_footprint(diameter: int) -> np.ndarray:
    """Boolean disc: offsets with dx^2 + dy^2 <= (diameter/2)^2."""
    if diameter < 1 or diameter % 2 == 0:
        raise InvalidInputError(f"diameter must be odd and >= 1, got {diameter}")
    r = (diameter - 1) // 2
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (xx * xx + yy * yy) * 4 <= diameter * diameter


def dilate(mask: MaskImage, diameter: int) -> MaskImage:
    """Morphological dilation with a disc structuring element."""
    footprint = disc_footprint(diameter)
    grown = ndimage.binary_dilation(mask.bitmap, structure=footprint)
    return MaskImage(width=mask.width, height=mask.height, bitmap=grown, camera=mask.camera)


def select_crop(
    mask: MaskImage,
    interval: tuple[float, float] = (1.5, 2.5),
    seed: int = 0,
) -> CropRect:
    """Square crop around the mask bounding box, scaled by a seeded factor.

    The side is k * max(bbox width, bbox height) with k uniform in the
    interval, then clamped to the image and shifted so the crop still covers
    the whole bounding box.
    """
    k_min, k_max = interval
    if not (1.0 <= k_min <= k_max):
        raise InvalidInputError(f"scale interval must satisfy 1 <= k_min <= k_max, got {interval}")
    rows = np.flatnonzero(mask.bitmap.any(axis=1))
    cols = np.flatnonzero(mask.bitmap.any(axis=0))
    if rows.size == 0:
        raise NoRegionError("mask has no set pixels")
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    bbox_side = max(x1 - x0 + 1, y1 - y0 + 1)

    rng = derive_rng(seed, "crop")
    k = k_min + (k_max - k_min) * rng.random()
    side = int(np.ceil(k * bbox_side))
    side = min(side, mask.width, mask.height)
    if side < bbox_side:
        raise InvalidInputError(
            "mask bounding box does not fit in any square crop inside the image"
        )

    cx = (x0 + x1 + 1) / 2.0
    cy = (y0 + y1 + 1) / 2.0
    x = int(round(cx - side / 2.0))
    y = int(round(cy - side / 2.0))
    x = min(max(x, max(0, x1 + 1 - side)), min(x0, mask.width - side))
    y = min(max(y, max(0, y1 + 1 - side)), min(y0, mask.height - side))
    return CropRect(x=x, y=y, side=side)
