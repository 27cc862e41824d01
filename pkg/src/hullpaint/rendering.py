"""Ray sampling and volume-rendering compositor.

The compositing law: with per-sample opacity a_i = 1 - exp(-sigma_i * delta_i),
sample i contributes weight w_i = a_i * prod_{j<i} (1 - a_j), the pixel color
is sum_i w_i * c_i, and the residual transmittance is prod_i (1 - a_i).
Weights and residual always sum to 1. Compositing accumulates in float64
regardless of the field's parameter precision; the telescoping product is the
numerically delicate part.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import torch

from .cameras import CameraModel
from .errors import InvalidInputError
from .rngutil import derive_rng


def opacity(x: torch.Tensor) -> torch.Tensor:
    """1 - exp(-x), mapping non-negative values into [0, 1)."""
    return 1.0 - torch.exp(-x)


@dataclass(frozen=True)
class SamplingConfig:
    """How rays are discretized: sample count, depth range, jitter."""

    n_samples: int = 192
    near: float = 0.05
    far: float = 8.0
    jitter: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidInputError(f"n_samples must be >= 1, got {self.n_samples}")
        if not self.near < self.far:
            raise InvalidInputError(f"require near < far, got near={self.near}, far={self.far}")

    def with_jitter(self, jitter: bool) -> "SamplingConfig":
        return replace(self, jitter=jitter)


@dataclass
class RaySamples:
    """Per-ray sample positions: t (..., S), delta (..., S), positions (..., S, 3)."""

    t: np.ndarray
    delta: np.ndarray
    positions: np.ndarray


def stratified_t(
    near: float,
    far: float,
    n_samples: int,
    n_rays: int,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Distances and spacings for n_rays rays over uniform bins on [near, far].

    Without an rng, each t is its bin midpoint; with one, t is uniform within
    its bin. Spacings are the bin widths either way, so they sum to far - near.
    """
    if near >= far:
        raise InvalidInputError(f"require near < far, got near={near}, far={far}")
    if n_samples < 1:
        raise InvalidInputError(f"n_samples must be >= 1, got {n_samples}")
    width = (far - near) / n_samples
    edges = near + width * np.arange(n_samples)
    if rng is None:
        offsets = np.full((n_rays, n_samples), 0.5)
    else:
        offsets = rng.random((n_rays, n_samples))
    t = edges[None, :] + offsets * width
    delta = np.full((n_rays, n_samples), width)
    return t, delta


def sample_ray(
    camera: CameraModel,
    pixel: tuple[int, int],
    n_samples: int,
    near: float,
    far: float,
    jitter_seed: int | None = None,
) -> RaySamples:
    """Sample positions along the ray through one pixel."""
    rng = None if jitter_seed is None else derive_rng(jitter_seed)
    t, delta = stratified_t(near, far, n_samples, 1, rng)
    origins, dirs = camera.pixel_rays(np.asarray([pixel]))
    positions = origins[:, None, :] + t[..., None] * dirs[:, None, :]
    return RaySamples(t=t[0], delta=delta[0], positions=positions[0])


def composite(
    sigma: torch.Tensor, color: torch.Tensor, delta: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Composite samples along rays.

    sigma, delta: (..., S); color: (..., S, 3). Returns float64
    (pixel color (..., 3), weights (..., S), residual transmittance (...,)).
    """
    sigma64 = sigma.to(torch.float64)
    delta64 = delta.to(torch.float64)
    color64 = color.to(torch.float64)
    alpha = opacity(sigma64 * delta64)
    survive = 1.0 - alpha
    trans = torch.cumprod(survive, dim=-1)
    trans_before = torch.cat([torch.ones_like(trans[..., :1]), trans[..., :-1]], dim=-1)
    weights = alpha * trans_before
    pixel = (weights.unsqueeze(-1) * color64).sum(dim=-2)
    residual = trans[..., -1]
    return pixel, weights, residual


QueryFn = Callable[[torch.Tensor], tuple[torch.Tensor, torch.Tensor]]


def render_rays(
    query: QueryFn,
    origins: np.ndarray,
    dirs: np.ndarray,
    sampling: SamplingConfig,
    rng: np.random.Generator | None = None,
    chunk: int = 8192,
) -> np.ndarray:
    """Render a flat list of rays to float64 colors (N, 3). No gradients."""
    n = len(origins)
    out = np.zeros((n, 3), dtype=np.float64)
    with torch.no_grad():
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            t, delta = stratified_t(
                sampling.near, sampling.far, sampling.n_samples, stop - start, rng
            )
            pos = origins[start:stop, None, :] + t[..., None] * dirs[start:stop, None, :]
            pos_t = torch.from_numpy(pos.reshape(-1, 3))
            sigma, color = query(pos_t)
            sigma = sigma.reshape(stop - start, sampling.n_samples)
            color = color.reshape(stop - start, sampling.n_samples, 3)
            pixel, _, _ = composite(sigma, color, torch.from_numpy(delta))
            out[start:stop] = pixel.numpy()
    return out


def render_view(field, camera: CameraModel, sampling: SamplingConfig) -> np.ndarray:
    """Render a full view to a float32 RGB image (H, W, 3) in [0, 1].

    `field` is anything with query(points)->(sigma, color); deterministic for a
    fixed sampling seed.
    """
    origins, dirs = camera.ray_grid()
    rng = derive_rng(sampling.seed, "render") if sampling.jitter else None
    colors = render_rays(field.query, origins, dirs, sampling, rng)
    img = colors.reshape(camera.height, camera.width, 3)
    return np.clip(img, 0.0, 1.0).astype(np.float32)
