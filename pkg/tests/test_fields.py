import math

import numpy as np
import pytest
import torch
from scipy.interpolate import RegularGridInterpolator

from hullpaint import FieldConfig, InvalidInputError, RadianceField
from hullpaint.fields import _trilinear

TINY = FieldConfig(n_levels=2, base_resolution=4, hidden_width=16)


class TestTrilinear:
    def test_matches_scipy_interpolator(self, rng):
        grid = rng.normal(size=(5, 5, 5, 2))
        coords = rng.random((200, 3))
        ours = _trilinear(torch.from_numpy(grid), torch.from_numpy(coords)).numpy()
        axes = [np.linspace(0.0, 1.0, 5)] * 3
        for f in range(2):
            oracle = RegularGridInterpolator(axes, grid[..., f])
            assert np.allclose(ours[:, f], oracle(coords), atol=1e-12)

    def test_exact_at_vertices(self, rng):
        grid = rng.normal(size=(4, 4, 4, 1))
        ijk = np.stack(np.meshgrid(*[np.arange(4)] * 3, indexing="ij"), axis=-1).reshape(-1, 3)
        coords = ijk / 3.0
        vals = _trilinear(torch.from_numpy(grid), torch.from_numpy(coords)).numpy()
        assert np.allclose(vals[:, 0], grid[ijk[:, 0], ijk[:, 1], ijk[:, 2], 0], atol=1e-12)

    def test_continuous_across_cell_boundaries(self, rng):
        grid = rng.normal(size=(5, 5, 5, 2))
        base = np.array([[0.5, 0.3, 0.7]])
        lo = _trilinear(torch.from_numpy(grid), torch.from_numpy(base - 1e-9)).numpy()
        hi = _trilinear(torch.from_numpy(grid), torch.from_numpy(base + 1e-9)).numpy()
        assert np.allclose(lo, hi, atol=1e-6)


class TestInitialization:
    def test_fresh_field_is_uniform_gray(self, rng):
        field = RadianceField(TINY)
        pts = torch.from_numpy(rng.uniform(-0.99, 0.99, size=(64, 3)).astype(np.float32))
        with torch.no_grad():
            sigma, color = field.query(pts)
        assert torch.allclose(color, torch.full((64, 3), 0.5), atol=0)
        # Density head outputs softplus(0) = ln 2 (float32 rounding applies).
        assert np.allclose(sigma.numpy(), math.log(2.0), atol=1e-6)

    def test_same_seed_same_parameters(self):
        a = RadianceField(TINY, init_seed=7)
        b = RadianceField(TINY, init_seed=7)
        for (na, ta), (nb, tb) in zip(a.named_tensors().items(), b.named_tensors().items()):
            assert na == nb
            assert np.array_equal(ta, tb)

    def test_different_seed_differs(self):
        a = RadianceField(TINY, init_seed=0)
        b = RadianceField(TINY, init_seed=1)
        assert not np.array_equal(a.named_tensors()["grids.0"], b.named_tensors()["grids.0"])

    def test_level_resolutions_double(self):
        cfg = FieldConfig(n_levels=4, base_resolution=8, growth=2.0)
        assert [cfg.level_resolution(i) for i in range(4)] == [8, 16, 32, 64]


class TestQuery:
    def test_outside_box_is_empty_space(self):
        field = RadianceField(TINY)
        pts = torch.tensor([[1.5, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 1.0001]])
        sigma, color = field.query(pts)
        assert torch.all(sigma == 0.0)
        assert torch.all(color == 0.0)

    def test_boundary_points_are_inside(self):
        field = RadianceField(TINY)
        sigma, _ = field.query(torch.tensor([[1.0, 1.0, 1.0], [-1.0, 0.0, 0.0]]))
        assert torch.all(sigma > 0.0)

    def test_custom_box_respected(self):
        cfg = FieldConfig(n_levels=1, base_resolution=2, box_min=(0.0, 0.0, 0.0), box_max=(4.0, 4.0, 4.0))
        field = RadianceField(cfg)
        sigma, _ = field.query(torch.tensor([[2.0, 2.0, 2.0], [-0.1, 2.0, 2.0]]))
        assert sigma[0] > 0.0
        assert sigma[1] == 0.0

    def test_rejects_non_finite_points(self):
        field = RadianceField(TINY)
        with pytest.raises(InvalidInputError):
            field.query(torch.tensor([[float("nan"), 0.0, 0.0]]))

    def test_rejects_bad_shape(self):
        field = RadianceField(TINY)
        with pytest.raises(InvalidInputError):
            field.query(torch.zeros(4, 2))

    def test_query_density_matches_query(self, rng):
        field = RadianceField(TINY, init_seed=3)
        pts = torch.from_numpy(rng.uniform(-1, 1, size=(32, 3)).astype(np.float32))
        sigma, _ = field.query(pts)
        assert torch.allclose(field.query_density(pts), sigma)

    def test_query_np_matches_torch(self, rng):
        field = RadianceField(TINY, init_seed=3)
        pts = rng.uniform(-1, 1, size=(32, 3))
        s_np, c_np = field.query_np(pts)
        s_t, c_t = field.query(torch.from_numpy(pts.astype(np.float32)))
        assert np.allclose(s_np, s_t.detach().numpy(), atol=1e-6)
        assert np.allclose(c_np, c_t.detach().numpy(), atol=1e-6)

    def test_output_ranges(self, rng):
        field = RadianceField(TINY, init_seed=9)
        # Perturb so outputs are no longer the zero-head constants.
        with torch.no_grad():
            field.color_out.weight.uniform_(-3, 3)
            field.density_out.weight.uniform_(-3, 3)
        pts = torch.from_numpy(rng.uniform(-1, 1, size=(128, 3)).astype(np.float32))
        sigma, color = field.query(pts)
        assert torch.all(sigma >= 0.0)
        assert torch.all((color >= 0.0) & (color <= 1.0))

    def test_float64_config_returns_float64(self):
        field = RadianceField(FieldConfig(n_levels=1, base_resolution=2, dtype="float64"))
        sigma, color = field.query(torch.zeros(2, 3, dtype=torch.float64))
        assert sigma.dtype == torch.float64
        assert color.dtype == torch.float64


class TestStateManagement:
    def test_tensor_round_trip_preserves_outputs(self, rng):
        a = RadianceField(TINY, init_seed=11)
        with torch.no_grad():
            for p in a.parameters():
                p.add_(torch.randn_like(p) * 0.1)
        b = RadianceField(TINY, init_seed=0)
        b.load_tensors(a.named_tensors())
        pts = rng.uniform(-1, 1, size=(64, 3))
        sa, ca = a.query_np(pts)
        sb, cb = b.query_np(pts)
        assert np.array_equal(sa, sb)
        assert np.array_equal(ca, cb)

    def test_load_missing_tensor_rejected(self):
        field = RadianceField(TINY)
        tensors = field.named_tensors()
        del tensors["density_out.bias"]
        with pytest.raises(InvalidInputError, match="density_out.bias"):
            field.load_tensors(tensors)

    def test_load_wrong_shape_rejected(self):
        field = RadianceField(TINY)
        tensors = field.named_tensors()
        tensors["grids.0"] = tensors["grids.0"][:-1]
        with pytest.raises(InvalidInputError, match="shape"):
            field.load_tensors(tensors)

    def test_snapshot_is_independent_and_frozen(self, rng):
        field = RadianceField(TINY, init_seed=2)
        frozen = field.snapshot()
        assert all(not p.requires_grad for p in frozen.parameters())
        before = frozen.named_tensors()
        with torch.no_grad():
            for p in field.parameters():
                p.add_(1.0)
        after = frozen.named_tensors()
        for name in before:
            assert np.array_equal(before[name], after[name])

    def test_gradients_reach_grids(self):
        field = RadianceField(TINY)
        # Output layers start at zero, which blocks gradient flow into the
        # grids; nudge them so the chain rule has something to propagate.
        with torch.no_grad():
            field.density_out.weight.fill_(0.1)
            field.color_out.weight.fill_(0.1)
        sigma, color = field.query(torch.rand(16, 3) * 2 - 1)
        (sigma.sum() + color.sum()).backward()
        assert field.grids[0].grad is not None
        assert torch.any(field.grids[0].grad != 0.0)

    def test_fresh_field_grid_gradients_are_blocked_by_zero_heads(self):
        field = RadianceField(TINY)
        sigma, color = field.query(torch.rand(16, 3) * 2 - 1)
        (sigma.sum() + color.sum()).backward()
        assert torch.all(field.grids[0].grad == 0.0)
        assert torch.any(field.density_out.weight.grad != 0.0)

    def test_n_parameters_counts_everything(self):
        field = RadianceField(TINY)
        assert field.n_parameters() == sum(p.numel() for p in field.parameters())
        assert field.n_parameters() > 0


class TestFieldConfig:
    def test_json_round_trip(self):
        cfg = FieldConfig(n_levels=3, base_resolution=5, box_min=(-2.0, -1.0, 0.0))
        assert FieldConfig.from_json(cfg.to_json()) == cfg

    def test_rebuild_from_json_same_outputs(self, rng):
        cfg = FieldConfig(n_levels=2, base_resolution=3)
        a = RadianceField(cfg, init_seed=5)
        b = RadianceField(FieldConfig.from_json(cfg.to_json()), init_seed=5)
        pts = rng.uniform(-1, 1, size=(16, 3))
        assert np.array_equal(a.query_np(pts)[0], b.query_np(pts)[0])
