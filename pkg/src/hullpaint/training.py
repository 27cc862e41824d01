"""Gradient-based field optimization: batches, losses, one-step updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .editloss import ConstraintSampleBatch, l_out
from .errors import InvalidInputError, TrainingDivergedError
from .fields import RadianceField
from .rendering import SamplingConfig, composite, stratified_t


@dataclass
class RayBatch:
    """A batch of R rays with S samples each, plus per-pixel target colors."""

    positions: torch.Tensor  # (R, S, 3)
    deltas: torch.Tensor  # (R, S)
    targets: torch.Tensor  # (R, 3)
    membership: torch.Tensor  # (R, S) bool, True = inside hull

    def __post_init__(self):
        r, s, _ = self.positions.shape
        if self.deltas.shape != (r, s) or self.membership.shape != (r, s):
            raise InvalidInputError("ray batch arrays are misaligned")
        if self.targets.shape != (r, 3):
            raise InvalidInputError(f"targets must be ({r}, 3), got {tuple(self.targets.shape)}")
        if r == 0:
            raise InvalidInputError("ray batch is empty")


@dataclass(frozen=True)
class LossWeights:
    lambda_c: float = 100.0
    lambda_sigma: float = 1000.0
    l_out_enabled: bool = True
    opacity_uses_delta: bool = False


def make_optimizer(
    field: RadianceField, lr_grid: float = 1e-2, lr_heads: float = 1e-3
) -> torch.optim.Adam:
    """Adam with a higher step size on grid features than on head parameters."""
    grid_params = list(field.grids.parameters())
    grid_ids = {id(p) for p in grid_params}
    head_params = [p for p in field.parameters() if id(p) not in grid_ids]
    return torch.optim.Adam(
        [
            {"params": grid_params, "lr": lr_grid},
            {"params": head_params, "lr": lr_heads},
        ]
    )


def compute_losses(
    field: RadianceField,
    frozen: RadianceField | None,
    batch: RayBatch,
    weights: LossWeights,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(total, rgb, l_out) losses for one batch, all float64 scalars.

    The RGB term is the mean squared error between composited and target pixel
    colors. The constrained term needs a frozen field; without one (or when
    disabled) it is zero.
    """
    r, s, _ = batch.positions.shape
    flat = batch.positions.reshape(-1, 3)
    sigma, color = field.query(flat)
    sigma = sigma.reshape(r, s)
    color = color.reshape(r, s, 3)
    pixel, w, _ = composite(sigma, color, batch.deltas)

    rgb_loss = ((pixel - batch.targets.to(torch.float64)) ** 2).mean()

    if weights.l_out_enabled and frozen is not None:
        with torch.no_grad():
            f_sigma, f_color = frozen.query(flat)
            f_sigma = f_sigma.reshape(r, s)
            f_color = f_color.reshape(r, s, 3)
            _, f_w, _ = composite(f_sigma, f_color, batch.deltas)
        constraint = ConstraintSampleBatch(
            sigma=sigma,
            color=color,
            weight=w,
            frozen_sigma=f_sigma,
            frozen_color=f_color,
            frozen_weight=f_w,
            membership=batch.membership,
            delta=batch.deltas,
        )
        out_loss = l_out(
            constraint,
            weights.lambda_c,
            weights.lambda_sigma,
            opacity_uses_delta=weights.opacity_uses_delta,
        )
    else:
        out_loss = torch.zeros((), dtype=torch.float64)

    return rgb_loss + out_loss, rgb_loss, out_loss


def train_step(
    field: RadianceField,
    frozen: RadianceField | None,
    batch: RayBatch,
    weights: LossWeights,
    optimizer: torch.optim.Optimizer,
    step: int = 0,
) -> float:
    """Run one optimizer update; returns the total loss before the update."""
    optimizer.zero_grad(set_to_none=True)
    total, _, _ = compute_losses(field, frozen, batch, weights)
    if not torch.isfinite(total):
        raise TrainingDivergedError(step)
    total.backward()
    optimizer.step()
    return float(total.detach())


def sample_training_batch(
    dataset,
    hull,
    sampling: SamplingConfig,
    batch_size: int,
    rng: np.random.Generator,
    dtype: torch.dtype = torch.float32,
) -> RayBatch:
    """Draw random (view, pixel) rays from the dataset's current images.

    Sample positions are stratified-jittered from rng; membership comes from
    the hull (all False when hull is None).
    """
    n_views = len(dataset.entries)
    view_idx = rng.integers(0, n_views, size=batch_size)
    origins = np.zeros((batch_size, 3))
    dirs = np.zeros((batch_size, 3))
    targets = np.zeros((batch_size, 3))
    for v in range(n_views):
        sel = np.flatnonzero(view_idx == v)
        if len(sel) == 0:
            continue
        entry = dataset.entries[v]
        cam = entry.camera
        u = rng.integers(0, cam.width, size=len(sel))
        vv = rng.integers(0, cam.height, size=len(sel))
        o, d = cam.pixel_rays(np.stack([u, vv], axis=-1))
        origins[sel] = o
        dirs[sel] = d
        targets[sel] = entry.image[vv, u].astype(np.float64) / 255.0

    t, delta = stratified_t(
        sampling.near, sampling.far, sampling.n_samples, batch_size,
        rng if sampling.jitter else None,
    )
    positions = origins[:, None, :] + t[..., None] * dirs[:, None, :]
    if hull is not None:
        member = hull.contains(positions.reshape(-1, 3)).reshape(batch_size, sampling.n_samples)
    else:
        member = np.zeros((batch_size, sampling.n_samples), dtype=bool)

    return RayBatch(
        positions=torch.from_numpy(positions).to(dtype),
        deltas=torch.from_numpy(delta).to(dtype),
        targets=torch.from_numpy(targets).to(dtype),
        membership=torch.from_numpy(member),
    )
