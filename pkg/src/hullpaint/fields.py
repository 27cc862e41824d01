"""Learnable density + color field over a bounded box.

Representation: a stack of dense trilinear feature grids at increasing
resolution, features concatenated across levels and fed to two small
fully-connected heads. Density goes through softplus (non-negative), color
through sigmoid (bounded to [0,1]). Color takes no view direction.

Points outside the bounding box return density 0 and color (0,0,0).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as tnf

from .errors import InvalidInputError


@dataclass(frozen=True)
class FieldConfig:
    box_min: tuple[float, float, float] = (-1.0, -1.0, -1.0)
    box_max: tuple[float, float, float] = (1.0, 1.0, 1.0)
    n_levels: int = 4
    base_resolution: int = 8
    growth: float = 2.0
    features_per_level: int = 2
    hidden_width: int = 32
    dtype: str = "float32"

    def level_resolution(self, level: int) -> int:
        return max(1, int(round(self.base_resolution * self.growth**level)))

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FieldConfig":
        raw = json.loads(text)
        raw["box_min"] = tuple(raw["box_min"])
        raw["box_max"] = tuple(raw["box_max"])
        return cls(**raw)

    @property
    def torch_dtype(self) -> torch.dtype:
        return {"float32": torch.float32, "float64": torch.float64}[self.dtype]


# The 8 cube corners as (x, y, z) offsets, fixed order.
_CORNERS = torch.tensor(
    [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=torch.long
)


def _trilinear(grid: torch.Tensor, coords01: torch.Tensor) -> torch.Tensor:
    """Interpolate a dense vertex grid (R+1, R+1, R+1, F) at coords in [0,1]^3.

    One fused gather over all 8 corners keeps the autograd graph small.
    """
    res = grid.shape[0] - 1
    n_features = grid.shape[-1]
    u = coords01 * res
    i0 = u.floor().long().clamp_(0, max(res - 1, 0))
    frac = (u - i0.to(u.dtype)).unsqueeze(1)  # (N, 1, 3)

    idx = i0.unsqueeze(1) + _CORNERS  # (N, 8, 3)
    stride = res + 1
    flat = (idx[..., 0] * stride + idx[..., 1]) * stride + idx[..., 2]
    corner_vals = grid.reshape(-1, n_features)[flat]  # (N, 8, F)
    weights = torch.where(_CORNERS.bool(), frac, 1.0 - frac).prod(dim=-1, keepdim=True)
    return (corner_vals * weights).sum(dim=1)


class RadianceField(nn.Module):
    """Queryable, trainable density/color field. See module docstring."""

    def __init__(self, config: FieldConfig | None = None, *, init_seed: int = 0):
        super().__init__()
        self.config = config or FieldConfig()
        dtype = self.config.torch_dtype
        gen = torch.Generator().manual_seed(init_seed)

        grids = []
        for level in range(self.config.n_levels):
            res = self.config.level_resolution(level)
            shape = (res + 1, res + 1, res + 1, self.config.features_per_level)
            init = torch.empty(shape, dtype=dtype).uniform_(-1e-2, 1e-2, generator=gen)
            grids.append(nn.Parameter(init))
        self.grids = nn.ParameterList(grids)

        feat_dim = self.config.n_levels * self.config.features_per_level
        hidden = self.config.hidden_width
        self.density_hidden = nn.Linear(feat_dim, hidden)
        self.density_out = nn.Linear(hidden, 1)
        self.color_hidden = nn.Linear(feat_dim, hidden)
        self.color_out = nn.Linear(hidden, 3)
        for lin in (self.density_hidden, self.color_hidden):
            nn.init.kaiming_uniform_(lin.weight, a=5**0.5, generator=gen)
            nn.init.zeros_(lin.bias)
        # Zero-initialized output layers: a fresh field is exactly mid-gray
        # with density softplus(0) everywhere inside the box.
        nn.init.zeros_(self.density_out.weight)
        nn.init.zeros_(self.density_out.bias)
        nn.init.zeros_(self.color_out.weight)
        nn.init.zeros_(self.color_out.bias)
        self.to(dtype)

        self.register_buffer("box_min", torch.tensor(self.config.box_min, dtype=dtype))
        self.register_buffer("box_max", torch.tensor(self.config.box_max, dtype=dtype))

    @property
    def dtype(self) -> torch.dtype:
        return self.config.torch_dtype

    def _features(self, points: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(features, inside-box mask) for points (N, 3)."""
        if points.ndim != 2 or points.shape[-1] != 3:
            raise InvalidInputError(f"points must be (N, 3), got {tuple(points.shape)}")
        if not torch.isfinite(points).all():
            raise InvalidInputError("query points contain non-finite coordinates")
        pts = points.to(self.dtype)
        span = self.box_max - self.box_min
        coords = (pts - self.box_min) / span
        inside = ((coords >= 0.0) & (coords <= 1.0)).all(dim=-1)
        coords = coords.clamp(0.0, 1.0)
        feats = torch.cat([_trilinear(g, coords) for g in self.grids], dim=-1)
        return feats, inside

    def query(self, points: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(density (N,), color (N, 3)) at world points (N, 3)."""
        feats, inside = self._features(points)
        mask = inside.to(feats.dtype)
        sigma = tnf.softplus(self.density_out(torch.relu(self.density_hidden(feats)))).squeeze(-1)
        color = torch.sigmoid(self.color_out(torch.relu(self.color_hidden(feats))))
        return sigma * mask, color * mask.unsqueeze(-1)

    def query_density(self, points: torch.Tensor) -> torch.Tensor:
        feats, inside = self._features(points)
        sigma = tnf.softplus(self.density_out(torch.relu(self.density_hidden(feats)))).squeeze(-1)
        return sigma * inside.to(feats.dtype)

    def query_np(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Numpy convenience wrapper around query (no gradients)."""
        with torch.no_grad():
            sigma, color = self.query(torch.from_numpy(np.asarray(points, dtype=np.float64)))
        return sigma.double().numpy(), color.double().numpy()

    def snapshot(self) -> "RadianceField":
        """Frozen deep copy: same outputs, no gradient tracking."""
        frozen = RadianceField(self.config)
        frozen.load_state_dict(self.state_dict())
        frozen.requires_grad_(False)
        frozen.eval()
        return frozen

    def named_tensors(self) -> dict[str, np.ndarray]:
        """All parameters as float32 numpy arrays, keyed for checkpointing."""
        return {
            name: param.detach().cpu().float().numpy()
            for name, param in self.named_parameters()
        }

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        with torch.no_grad():
            for name, param in self.named_parameters():
                if name not in tensors:
                    raise InvalidInputError(f"checkpoint missing field tensor {name!r}")
                value = torch.from_numpy(np.ascontiguousarray(tensors[name]))
                if tuple(value.shape) != tuple(param.shape):
                    raise InvalidInputError(
                        f"field tensor {name!r} has shape {tuple(value.shape)}, expected {tuple(param.shape)}"
                    )
                param.copy_(value.to(param.dtype))

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())
