import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sceneaug import primitives as prim
from sceneaug.errors import DegenerateMeshError, EmptyMeshError, ObjParseError
from sceneaug.geometry import TopDownConfig
from sceneaug.rasterizer import (
    Placement,
    TriMesh,
    fit_scale_to_footprint,
    load_obj,
    parse_obj,
    rasterize,
    transform_vertices,
    write_obj,
)

UNIT_CUBE_OBJ = """
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 2 3
f 1 3 4
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


def cfg(res=500.0):
    return TopDownConfig(resolution=res)


class TestObjParsing:
    def test_unit_cube(self):
        mesh = parse_obj(UNIT_CUBE_OBJ)
        assert len(mesh.vertices) == 8
        assert len(mesh.triangles) == 12
        # recentered: bottom at z=0, centered in xy
        assert mesh.vertices[:, 2].min() == pytest.approx(0.0)
        assert mesh.vertices[:, 0].min() == pytest.approx(-0.5)
        assert mesh.vertices[:, 0].max() == pytest.approx(0.5)

    def test_quad_faces_fan_triangulated(self):
        text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"
        mesh = parse_obj(text)
        assert len(mesh.triangles) == 2

    def test_face_index_zero_rejected(self):
        with pytest.raises(ObjParseError):
            parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")

    def test_out_of_range_index_rejected(self):
        with pytest.raises(ObjParseError):
            parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")

    def test_non_numeric_vertex_rejected(self):
        with pytest.raises(ObjParseError):
            parse_obj("v a b c\nf 1 1 1\n")

    def test_no_faces_is_empty_mesh(self):
        with pytest.raises(EmptyMeshError):
            parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\n")

    def test_slash_face_entries(self):
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2/2 3//3\n"
        mesh = parse_obj(text)
        assert len(mesh.triangles) == 1

    def test_write_read_round_trip(self, tmp_path):
        mesh = prim.box(0.04, 0.03, 0.02)
        path = tmp_path / "box.obj"
        write_obj(mesh, path)
        back = load_obj(path)
        assert np.allclose(back.vertices, mesh.vertices, atol=1e-8)
        assert np.array_equal(back.triangles, mesh.triangles)


class TestRasterize:
    def test_cube_footprint_analytic(self):
        # 0.1 m cube at 500 px/m covers a 50x50 cell square, one boundary
        # ring of tolerance
        mesh = parse_obj(UNIT_CUBE_OBJ)
        patch = rasterize(mesh, Placement((0.3213, 0.1621), 0.0, 0.1), cfg())
        count = int(patch.mask.sum())
        assert 48 * 48 <= count <= 52 * 52
        interior = patch.height[patch.height > 0]
        assert np.allclose(interior.max(), 0.1, atol=1e-9)

    def test_quarter_turn_symmetry(self):
        mesh = parse_obj(UNIT_CUBE_OBJ)
        base = rasterize(mesh, Placement((0.3213, 0.1621), 0.0, 0.1), cfg())
        turned = rasterize(mesh, Placement((0.3213, 0.1621), math.pi / 2, 0.1), cfg())
        assert np.array_equal(base.mask, turned.mask)
        assert np.allclose(base.height, turned.height, atol=1e-9)

    def test_tiny_scale_degenerate(self):
        mesh = parse_obj(UNIT_CUBE_OBJ)
        with pytest.raises(DegenerateMeshError):
            rasterize(mesh, Placement((0.32, 0.16), 0.0, 1e-9), cfg())

    def test_mask_matches_height_support(self):
        mesh = prim.cone(0.03, 0.02)
        patch = rasterize(mesh, Placement((0.3, 0.15), 0.7, 1.0), cfg())
        assert np.array_equal(patch.mask, patch.height > 1e-6)

    def test_translation_equivariance_exact_cells(self):
        # dyadic coordinates make every intermediate float exact, so a
        # whole-cell shift moves the patch bit-for-bit
        config = TopDownConfig(x_min=0.0, x_max=0.5, y_min=0.0, y_max=0.25,
                               resolution=256.0)
        mesh = prim.box(0.03125, 0.046875, 0.015625)
        a = rasterize(mesh, Placement((0.125, 0.0625), 0.0, 1.0), config)
        shift_cells = 7
        b = rasterize(mesh, Placement((0.125 + shift_cells / 256.0, 0.0625), 0.0, 1.0),
                      config)
        assert np.array_equal(np.roll(a.mask, shift_cells, axis=1), b.mask)
        assert np.array_equal(np.roll(a.height, shift_cells, axis=1), b.height)


def brute_force_patch(mesh: TriMesh, placement: Placement, config: TopDownConfig):
    """Oracle: test every cell center against every transformed triangle."""
    world = transform_vertices(mesh, placement)
    px = (world[:, 0] - config.x_min) * config.resolution
    py = (world[:, 1] - config.y_min) * config.resolution
    height = np.zeros((config.height, config.width))
    covered = np.zeros((config.height, config.width), dtype=bool)
    for ia, ib, ic in mesh.triangles:
        ax, ay, az = px[ia], py[ia], world[ia, 2]
        bx, by, bz = px[ib], py[ib], world[ib, 2]
        cx, cy, cz = px[ic], py[ic], world[ic, 2]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area == 0:
            continue
        lo_u = max(int(min(ax, bx, cx)) - 1, 0)
        hi_u = min(int(max(ax, bx, cx)) + 1, config.width - 1)
        lo_v = max(int(min(ay, by, cy)) - 1, 0)
        hi_v = min(int(max(ay, by, cy)) + 1, config.height - 1)
        for v in range(lo_v, hi_v + 1):
            for u in range(lo_u, hi_u + 1):
                qx, qy = u + 0.5, v + 0.5
                w0 = (cx - bx) * (qy - by) - (cy - by) * (qx - bx)
                w1 = (ax - cx) * (qy - cy) - (ay - cy) * (qx - cx)
                w2 = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
                if area < 0:
                    w0, w1, w2 = -w0, -w1, -w2
                if w0 >= 0 and w1 >= 0 and w2 >= 0:
                    z = (w0 * az + w1 * bz + w2 * cz) / abs(area)
                    covered[v, u] = True
                    height[v, u] = max(height[v, u], max(z, 0.0))
    height[~covered] = 0.0
    return covered, height


def random_mesh_and_placement(rng, config):
    factories = [
        lambda: prim.box(rng.uniform(0.02, 0.06), rng.uniform(0.02, 0.06),
                         rng.uniform(0.01, 0.03)),
        lambda: prim.cylinder(rng.uniform(0.01, 0.03), rng.uniform(0.01, 0.02),
                              segments=int(rng.integers(5, 16))),
        lambda: prim.cone(rng.uniform(0.01, 0.03), rng.uniform(0.01, 0.03),
                          segments=int(rng.integers(5, 14))),
        lambda: prim.star_prism(int(rng.integers(4, 8)), rng.uniform(0.02, 0.035),
                                rng.uniform(0.008, 0.018), rng.uniform(0.008, 0.02)),
        lambda: prim.wedge(rng.uniform(0.02, 0.05), rng.uniform(0.02, 0.05),
                           rng.uniform(0.01, 0.03)),
    ]
    mesh = factories[int(rng.integers(len(factories)))]()
    placement = Placement(
        center=(rng.uniform(config.x_min + 0.1, config.x_max - 0.1),
                rng.uniform(config.y_min + 0.06, config.y_max - 0.06)),
        yaw=float(rng.uniform(0, 2 * math.pi)),
        scale=float(rng.uniform(0.7, 1.3)),
    )
    return mesh, placement


class TestRasterOracle:
    @given(st.integers(0, 2 ** 32))
    @settings(max_examples=12, deadline=None)
    def test_matches_brute_force_on_nearly_all_cells(self, seed):
        rng = np.random.default_rng(seed)
        config = TopDownConfig(x_max=0.32, y_max=0.16, resolution=400.0)
        mesh, placement = random_mesh_and_placement(rng, config)
        patch = rasterize(mesh, placement, config)
        covered, height = brute_force_patch(mesh, placement, config)
        union = patch.mask | covered
        if not union.any():
            return
        both = patch.mask & covered
        mismatch = (union & ~both) | (both & (np.abs(patch.height - height) > 1e-6))
        assert mismatch.sum() <= max(1, 0.01 * union.sum())


class TestFitScale:
    def test_hand_evaluated_min_ratio(self):
        mesh = parse_obj(UNIT_CUBE_OBJ)
        assert fit_scale_to_footprint(mesh, (0.2, 0.1)) == pytest.approx(0.1)

    def test_identity_when_target_matches(self):
        mesh = prim.box(0.04, 0.03, 0.02)
        assert fit_scale_to_footprint(mesh, (0.04, 0.03)) == pytest.approx(1.0)

    def test_zero_extent_mesh_degenerate(self):
        flat = TriMesh(
            np.array([[0, 0, 0], [0, 0, 1], [0, 1e-12, 0.5]]),
            np.array([[0, 1, 2]]),
        )
        with pytest.raises(DegenerateMeshError):
            fit_scale_to_footprint(flat, (0.1, 0.1))

    def test_scaled_footprint_fits_target(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            mesh = prim.box(rng.uniform(0.01, 0.1), rng.uniform(0.01, 0.1), 0.02)
            target = (rng.uniform(0.02, 0.2), rng.uniform(0.02, 0.2))
            s = fit_scale_to_footprint(mesh, target)
            w, h = mesh.xy_extent()
            assert w * s <= target[0] + 1e-12
            assert h * s <= target[1] + 1e-12
