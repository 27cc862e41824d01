"""Spatially-constrained loss tying the edited field to a frozen snapshot.

For every ray sample that falls outside the editable hull, the edited field's
density and color are pulled toward the frozen (pre-edit) field's values.
Each sample's residual is scaled by its compositing visibility from either
field (w_hat + w), so fully transparent or occluded space is not constrained.
Per ray the sum is normalized by the count of outside-hull samples; rays
entirely inside the hull contribute zero. Gradients reach only the edited
field: all frozen-side tensors are detached.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import InvalidInputError
from .rendering import opacity


@dataclass
class ConstraintSampleBatch:
    """Aligned per-sample values for a batch of rays, shape (R, S) / (R, S, 3).

    Edited-field tensors may carry gradients; frozen ones must not. The (R, S)
    layout encodes ray grouping: row r holds the samples of ray r in order.
    membership[r, i] is 1 where sample i of ray r lies inside the hull.
    """

    sigma: torch.Tensor
    color: torch.Tensor
    weight: torch.Tensor
    frozen_sigma: torch.Tensor
    frozen_color: torch.Tensor
    frozen_weight: torch.Tensor
    membership: torch.Tensor
    delta: torch.Tensor | None = None

    def validate(self) -> None:
        rs = self.sigma.shape
        if len(rs) != 2:
            raise InvalidInputError(f"sigma must be (R, S), got {tuple(rs)}")
        for name in ("weight", "frozen_sigma", "frozen_weight", "membership"):
            if getattr(self, name).shape != rs:
                raise InvalidInputError(
                    f"{name} shape {tuple(getattr(self, name).shape)} does not match sigma {tuple(rs)}"
                )
        for name in ("color", "frozen_color"):
            if getattr(self, name).shape != (*rs, 3):
                raise InvalidInputError(
                    f"{name} shape {tuple(getattr(self, name).shape)} must be {(*rs, 3)}"
                )
        if self.delta is not None and self.delta.shape != rs:
            raise InvalidInputError(
                f"delta shape {tuple(self.delta.shape)} does not match sigma {tuple(rs)}"
            )


def l_out(
    batch: ConstraintSampleBatch,
    lambda_c: float = 100.0,
    lambda_sigma: float = 1000.0,
    *,
    opacity_uses_delta: bool = False,
) -> torch.Tensor:
    """Per-ray constrained loss, averaged over the batch (float64 scalar).

    The density residual compares opacity-mapped densities; by default the
    mapping is applied to sigma directly. opacity_uses_delta=True switches to
    sigma * delta (the rendering-equation usage) and requires batch.delta.
    """
    if lambda_c < 0 or lambda_sigma < 0:
        raise InvalidInputError("lambda_c and lambda_sigma must be non-negative")
    batch.validate()
    if opacity_uses_delta and batch.delta is None:
        raise InvalidInputError("opacity_uses_delta=True requires batch.delta")

    sigma = batch.sigma.to(torch.float64)
    color = batch.color.to(torch.float64)
    weight = batch.weight.to(torch.float64)
    f_sigma = batch.frozen_sigma.detach().to(torch.float64)
    f_color = batch.frozen_color.detach().to(torch.float64)
    f_weight = batch.frozen_weight.detach().to(torch.float64)
    outside = 1.0 - batch.membership.to(torch.float64)

    if opacity_uses_delta:
        delta = batch.delta.to(torch.float64)
        dens_residual = (opacity(sigma * delta) - opacity(f_sigma * delta)) ** 2
    else:
        dens_residual = (opacity(sigma) - opacity(f_sigma)) ** 2
    color_residual = ((color - f_color) ** 2).sum(dim=-1)

    per_sample = (lambda_c * color_residual + lambda_sigma * dens_residual)
    per_sample = per_sample * (f_weight + weight) * outside

    m = outside.sum(dim=-1)
    ray_loss = torch.where(
        m > 0, per_sample.sum(dim=-1) / m.clamp(min=1.0), torch.zeros_like(m)
    )
    return ray_loss.mean()
