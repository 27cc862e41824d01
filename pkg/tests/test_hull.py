import math
import time
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hullpaint import (
    DegenerateHullWarning,
    InvalidInputError,
    MaskImage,
    VisualHull,
    hull_from_masks,
    hull_from_mesh,
    look_at,
    parse_obj,
)
from hullpaint.hull import (
    PosedMesh,
    axis_aligned_cameras,
    load_mesh_obj,
    silhouettes_from_mesh,
)
from hullpaint.sceneio import sphere_silhouette

from conftest import orthogonal_sphere_cameras


def reference_membership(points, masks):
    """Independent reimplementation: project each point into every silhouette."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.ones(len(points), dtype=bool)
    for mask in masks:
        cam = mask.camera
        c2w = np.asarray(cam.c2w)
        w2c = np.linalg.inv(c2w)
        homo = np.concatenate([points, np.ones((len(points), 1))], axis=-1)
        local = homo @ w2c.T
        x, y, z = local[:, 0], local[:, 1], local[:, 2]
        ok = z > 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.floor(x / z * cam.fx + cam.cx).astype(np.int64)
            v = np.floor(y / z * cam.fy + cam.cy).astype(np.int64)
        inb = ok & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
        hit = np.zeros(len(points), dtype=bool)
        hit[inb] = mask.bitmap[v[inb], u[inb]]
        out &= hit
    return out


class TestMaskImage:
    def test_from_grayscale_threshold_at_128(self):
        values = np.array([[0, 127], [128, 255]], dtype=np.uint8)
        mask = MaskImage.from_grayscale(values)
        assert mask.bitmap.tolist() == [[False, False], [True, True]]
        assert mask.n_set == 2

    def test_grayscale_round_trip(self, rng):
        bitmap = rng.random((5, 7)) < 0.5
        mask = MaskImage(width=7, height=5, bitmap=bitmap)
        again = MaskImage.from_grayscale(mask.to_grayscale())
        assert np.array_equal(again.bitmap, bitmap)

    def test_bitmap_is_read_only(self):
        mask = MaskImage(width=2, height=2, bitmap=np.ones((2, 2), dtype=bool))
        with pytest.raises(ValueError):
            mask.bitmap[0, 0] = False

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            MaskImage(width=3, height=2, bitmap=np.ones((3, 3), dtype=bool))


class TestVisualHull:
    def test_matches_projection_oracle_on_sphere(self, sphere_hull_fixture, rng):
        hull, masks, _ = sphere_hull_fixture
        points = rng.uniform(-2.0, 2.0, size=(100_000, 3))
        ours = hull.contains(points)
        ref = reference_membership(points, masks)
        mismatches = int(np.sum(ours != ref))
        assert mismatches == 0
        # Sanity: the region is non-trivial on both sides.
        assert 0 < ours.sum() < len(points)

    def test_known_points(self, sphere_hull_fixture):
        hull, _, _ = sphere_hull_fixture
        assert bool(hull.contains(np.array([0.0, 0.0, 0.0])))
        assert bool(hull.contains(np.array([[0.5, 0.5, 0.5]])))
        assert not bool(hull.contains(np.array([1.5, 0.0, 0.0])))
        assert not bool(hull.contains(np.array([0.0, -3.0, 0.0])))

    def test_scalar_point_returns_scalar_bool(self, sphere_hull_fixture):
        hull, _, _ = sphere_hull_fixture
        out = hull.contains(np.zeros(3))
        assert out.shape == ()
        assert out.dtype == bool

    def test_point_behind_a_camera_is_outside(self):
        cam = look_at((0.0, 0.0, 4.0), (0.0, 0.0, 0.0), width=32, height=32, focal=32.0)
        mask = MaskImage(width=32, height=32, bitmap=np.ones((32, 32), dtype=bool), camera=cam)
        hull = hull_from_masks([mask])
        assert bool(hull.contains(np.array([0.0, 0.0, 0.0])))
        assert not bool(hull.contains(np.array([0.0, 0.0, 5.0])))
        # Points in the camera plane (z == 0 in camera space) count as outside.
        assert not bool(hull.contains(np.array([0.0, 0.0, 4.0])))

    def test_intersection_shrinks_with_more_views(self, sphere_hull_fixture, rng):
        _, masks, _ = sphere_hull_fixture
        points = rng.uniform(-1.5, 1.5, size=(2000, 3))
        inside_prev = np.ones(len(points), dtype=bool)
        for k in range(1, len(masks) + 1):
            inside = hull_from_masks(masks[:k]).contains(points)
            assert np.all(inside <= inside_prev)
            inside_prev = inside

    def test_view_order_does_not_matter(self, sphere_hull_fixture, rng):
        _, masks, _ = sphere_hull_fixture
        points = rng.uniform(-1.5, 1.5, size=(500, 3))
        a = hull_from_masks(masks).contains(points)
        b = hull_from_masks(masks[::-1]).contains(points)
        assert np.array_equal(a, b)

    def test_empty_silhouette_warns_and_empties_hull(self):
        cam = orthogonal_sphere_cameras()[0]
        empty = MaskImage(width=128, height=128, bitmap=np.zeros((128, 128), dtype=bool), camera=cam)
        with pytest.warns(DegenerateHullWarning):
            hull = hull_from_masks([empty])
        assert not hull.contains(np.zeros((10, 3))).any()

    def test_mask_without_camera_rejected(self):
        mask = MaskImage(width=4, height=4, bitmap=np.ones((4, 4), dtype=bool))
        with pytest.raises(InvalidInputError):
            hull_from_masks([mask])

    def test_no_masks_rejected(self):
        with pytest.raises(InvalidInputError):
            hull_from_masks([])

    def test_throughput_at_least_one_million_per_second(self, sphere_hull_fixture):
        hull, _, _ = sphere_hull_fixture
        points = np.random.default_rng(0).uniform(-2, 2, size=(1_000_000, 3))
        hull.contains(points[:1000])  # warm up
        start = time.perf_counter()
        hull.contains(points)
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"1e6 queries took {elapsed:.3f}s"

    @given(st.floats(min_value=0.0, max_value=0.99))
    def test_sphere_interior_radii(self, r):
        cams = orthogonal_sphere_cameras()
        masks = [sphere_silhouette(c, (0, 0, 0), 1.0) for c in cams]
        hull = hull_from_masks(masks)
        point = np.array([r, 0.0, 0.0])
        assert bool(hull.contains(point))


def make_cube_obj(half=0.5):
    """Unit-ish cube OBJ text with 12 triangles."""
    corners = [
        (x, y, z)
        for x in (-half, half)
        for y in (-half, half)
        for z in (-half, half)
    ]
    faces = [
        (1, 2, 4), (1, 4, 3), (5, 8, 6), (5, 7, 8),
        (1, 6, 2), (1, 5, 6), (3, 4, 8), (3, 8, 7),
        (1, 3, 7), (1, 7, 5), (2, 6, 8), (2, 8, 4),
    ]
    lines = [f"v {x} {y} {z}" for x, y, z in corners]
    lines += [f"f {a} {b} {c}" for a, b, c in faces]
    return "\n".join(lines) + "\n"


class TestObjParsing:
    def test_vertices_and_faces(self):
        mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        assert mesh.vertices.shape == (3, 3)
        assert mesh.triangles.tolist() == [[0, 1, 2]]

    def test_comments_and_blank_lines_skipped(self):
        mesh = parse_obj("# header\n\nv 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 3\n")
        assert len(mesh.triangles) == 1

    def test_face_attribute_suffixes_stripped(self):
        mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3//3\n")
        assert mesh.triangles.tolist() == [[0, 1, 2]]

    def test_negative_indices_count_from_end(self):
        mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
        assert mesh.triangles.tolist() == [[0, 1, 2]]

    def test_unsupported_records_warn_once_per_kind(self):
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvn 0 1 0\nvt 0 0\nf 1 2 3\n"
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            parse_obj(text)
        kinds = sorted({str(w.message) for w in caught})
        assert len(kinds) == 2  # one for vn, one for vt

    def test_non_triangular_faces_ignored_with_warning(self):
        text = make_cube_obj() + "f 1 2 4 3\n"
        with pytest.warns(UserWarning, match="f"):
            mesh = parse_obj(text)
        assert len(mesh.triangles) == 12

    def test_no_triangles_rejected(self):
        with pytest.raises(InvalidInputError):
            parse_obj("v 0 0 0\nv 1 1 1\n")

    def test_out_of_range_index_rejected(self):
        with pytest.raises(InvalidInputError):
            parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 3\n")

    def test_load_with_transform(self, tmp_path):
        path = tmp_path / "cube.obj"
        path.write_text(make_cube_obj())
        shift = np.eye(4)
        shift[:3, 3] = [1.0, 2.0, 3.0]
        mesh = load_mesh_obj(path, transform=shift)
        lo, hi = mesh.bounds()
        assert np.allclose(lo, [0.5, 1.5, 2.5])
        assert np.allclose(hi, [1.5, 2.5, 3.5])

    def test_bad_transform_rejected(self, tmp_path):
        path = tmp_path / "cube.obj"
        path.write_text(make_cube_obj())
        bad = np.eye(4)
        bad[3] = [0, 0, 0, 2]
        with pytest.raises(InvalidInputError):
            load_mesh_obj(path, transform=bad)


def reference_raster(tri_uv, width, height):
    """Point-in-triangle test at pixel centers via barycentric signs."""
    a, b, c = [np.asarray(p, dtype=np.float64) for p in tri_uv]

    def cross2(u, v):
        return u[0] * v[1] - u[1] * v[0]

    out = np.zeros((height, width), dtype=bool)
    for y in range(height):
        for x in range(width):
            p = np.array([x + 0.5, y + 0.5])
            d1 = cross2(b - a, p - a)
            d2 = cross2(c - b, p - b)
            d3 = cross2(a - c, p - c)
            out[y, x] = (d1 > 0 and d2 > 0 and d3 > 0) or (d1 < 0 and d2 < 0 and d3 < 0)
    return out


class TestMeshSilhouettes:
    def test_cube_silhouette_matches_interior_oracle(self):
        mesh = parse_obj(make_cube_obj())
        cam = look_at((0.0, 0.0, 3.0), (0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0), width=64, height=64, focal=64.0)
        sil = silhouettes_from_mesh(mesh, [cam])[0]
        # Rasterize each face with an independent barycentric-sign test and
        # union them; strict-interior pixels must agree exactly.
        ref = np.zeros((64, 64), dtype=bool)
        for tri in mesh.triangles:
            uv, z = cam.project(mesh.vertices[tri])
            assert np.all(z > 0)
            ref |= reference_raster(uv, 64, 64)
        disagree = sil.bitmap ^ ref
        # Allow disagreement only on edge pixels (where the oracle's strict
        # inequality and the rasterizer's tie rule may differ).
        from scipy.ndimage import binary_dilation

        boundary = binary_dilation(ref) & ~ref | (ref & ~binary_dilation(~ref))
        assert not np.any(disagree & ~boundary)

    def test_shared_edges_covered_exactly_once_semantics(self):
        # Two triangles forming a square: the union must equal the square's
        # rasterization with no hole along the shared diagonal.
        mesh = parse_obj("v -0.5 -0.5 0\nv 0.5 -0.5 0\nv 0.5 0.5 0\nv -0.5 0.5 0\nf 1 2 3\nf 1 3 4\n")
        cam = look_at((0.0, 0.0, 2.0), (0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0), width=48, height=48, focal=48.0)
        sil = silhouettes_from_mesh(mesh, [cam])[0]
        filled = sil.bitmap[12:36, 12:36]
        assert filled.all()

    def test_mesh_behind_camera_warns_and_gives_empty_mask(self):
        mesh = parse_obj(make_cube_obj())
        cam = look_at((0.0, 0.0, 3.0), (0.0, 0.0, 6.0), up=(0.0, 1.0, 0.0), width=32, height=32, focal=32.0)
        with pytest.warns(UserWarning):
            sil = silhouettes_from_mesh(mesh, [cam])[0]
        assert sil.n_set == 0

    def test_partially_behind_camera_is_clipped_not_dropped(self):
        # A triangle straddling the camera plane still rasterizes its front
        # part. (It must not lie in a plane through the camera center, or the
        # projection would be a zero-area sliver.)
        mesh = parse_obj("v 0 0.3 1\nv 0.5 -0.1 -1\nv -0.5 -0.3 -1\nf 1 2 3\n")
        cam = look_at((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), up=(0.0, 1.0, 0.0), width=32, height=32, focal=16.0)
        sil = silhouettes_from_mesh(mesh, [cam])[0]
        assert sil.n_set > 0


class TestHullFromMesh:
    def test_axis_aligned_cameras_surround_center(self):
        cams = axis_aligned_cameras((0.5, 0.0, -0.5), 3.0, width=64, height=64)
        assert len(cams) == 6
        center = np.array([0.5, 0.0, -0.5])
        for cam in cams:
            assert np.isclose(np.linalg.norm(cam.position - center), 3.0)
            uv, z = cam.project(center[None, :])
            assert z[0] > 0
            assert np.allclose(uv[0], [32.0, 32.0], atol=1e-9)

    def test_cube_mesh_hull_classifies_interior_and_exterior(self, rng):
        mesh = parse_obj(make_cube_obj(half=0.5))
        hull = hull_from_mesh(mesh, resolution=256)
        inner = rng.uniform(-0.4, 0.4, size=(500, 3))
        assert hull.contains(inner).all()
        outer = rng.uniform(-2.0, 2.0, size=(2000, 3))
        far = np.abs(outer).max(axis=1) > 0.62
        assert not hull.contains(outer[far]).any()

    def test_sphere_mesh_hull_matches_analytic_silhouettes(self, rng):
        # Icosphere-ish: sample a sphere with an analytic silhouette hull as
        # the reference; mesh-based hull must agree away from the boundary.
        lines = []
        n_lat, n_lon = 12, 16
        verts = []
        for i in range(n_lat + 1):
            theta = math.pi * i / n_lat
            for j in range(n_lon):
                phi = 2 * math.pi * j / n_lon
                verts.append((
                    math.sin(theta) * math.cos(phi),
                    math.sin(theta) * math.sin(phi),
                    math.cos(theta),
                ))
        for x, y, z in verts:
            lines.append(f"v {x} {y} {z}")
        for i in range(n_lat):
            for j in range(n_lon):
                a = i * n_lon + j + 1
                b = i * n_lon + (j + 1) % n_lon + 1
                c = a + n_lon
                d = b + n_lon
                lines.append(f"f {a} {b} {d}")
                lines.append(f"f {a} {d} {c}")
        mesh = parse_obj("\n".join(lines))
        cams = orthogonal_sphere_cameras(width=256, height=256, focal=256.0)
        hull = hull_from_mesh(mesh, cameras=cams)
        pts = rng.uniform(-1.4, 1.4, size=(4000, 3))
        r = np.linalg.norm(pts, axis=1)
        clear = (r < 0.85) | (r > 1.15)
        analytic = hull_from_masks([sphere_silhouette(c, (0, 0, 0), 1.0) for c in cams])
        ours = hull.contains(pts[clear])
        ref = analytic.contains(pts[clear])
        assert np.mean(ours == ref) > 0.995
