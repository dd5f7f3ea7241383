import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rigid_rotation
from sceneaug.errors import EmptyProjectionError, InvalidDepthError, OutOfBoundsError
from sceneaug.geometry import (
    CameraIntrinsics,
    CameraPose,
    RgbdFrame,
    TopDownConfig,
    build_topdown,
    deproject_pixel,
    nearest_fill_indices,
    topdown_px_to_world,
    world_to_topdown_px,
)


def make_frame(depth, intr=None, pose=None, rgb=None):
    h, w = depth.shape
    intr = intr or CameraIntrinsics(1.0, 1.0, 0.0, 0.0, w, h)
    pose = pose or CameraPose.identity()
    if rgb is None:
        rgb = np.zeros((h, w, 3), dtype=np.uint8)
    return RgbdFrame(rgb, depth.astype(np.float32), intr, pose)


class TestCameraTypes:
    def test_intrinsics_reject_bad_focal(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(0.0, 1.0, 0.0, 0.0, 4, 4)

    def test_intrinsics_reject_principal_point_outside(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(1.0, 1.0, 5.0, 0.0, 4, 4)

    def test_pose_rejects_non_orthonormal(self):
        bad = np.eye(3)
        bad[0, 1] = 0.01
        with pytest.raises(ValueError):
            CameraPose(bad, np.zeros(3))

    def test_pose_rejects_reflection(self):
        refl = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            CameraPose(refl, np.zeros(3))

    @given(st.integers(0, 2 ** 32))
    @settings(max_examples=25, deadline=None)
    def test_random_rotations_accepted(self, seed):
        rot = rigid_rotation(np.random.default_rng(seed))
        pose = CameraPose(rot, np.zeros(3))
        assert np.allclose(pose.rotation @ pose.rotation.T, np.eye(3), atol=1e-9)

    def test_depth_sanitized_to_invalid_sentinel(self):
        depth = np.array([[0.5, 11.0], [-1.0, np.nan]], dtype=np.float32)
        frame = make_frame(depth)
        assert frame.depth[0, 0] == pytest.approx(0.5)
        assert frame.depth[0, 1] == 0.0
        assert frame.depth[1, 0] == 0.0
        assert frame.depth[1, 1] == 0.0


class TestDeproject:
    def test_identity_unit_focal(self):
        depth = np.full((2, 2), 1.0)
        frame = make_frame(depth)
        assert np.allclose(deproject_pixel(frame, 0, 0), [0, 0, 1])

    def test_hand_evaluated_pinhole(self):
        # fx=fy=100, cx=cy=50, pixel (150, 50), depth 2:
        # x = (150-50)*2/100 = 2, y = 0, z = 2
        depth = np.full((200, 200), 2.0)
        intr = CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 200, 200)
        frame = make_frame(depth, intr=intr)
        assert np.allclose(deproject_pixel(frame, 150, 50), [2.0, 0.0, 2.0])

    def test_zero_depth_raises(self):
        depth = np.zeros((2, 2))
        frame = make_frame(depth)
        with pytest.raises(InvalidDepthError):
            deproject_pixel(frame, 0, 0)

    def test_out_of_bounds_pixel(self):
        frame = make_frame(np.full((2, 2), 1.0))
        with pytest.raises(OutOfBoundsError):
            deproject_pixel(frame, 2, 0)

    @given(st.integers(0, 2 ** 32))
    @settings(max_examples=20, deadline=None)
    def test_matches_matrix_oracle_under_random_pose(self, seed):
        rng = np.random.default_rng(seed)
        rot = rigid_rotation(rng)
        trans = rng.uniform(-1, 1, 3)
        intr = CameraIntrinsics(80.0, 90.0, 16.0, 12.0, 32, 24)
        depth = rng.uniform(0.2, 3.0, (24, 32)).astype(np.float32)
        frame = make_frame(depth, intr=intr, pose=CameraPose(rot, trans))
        u, v = int(rng.integers(32)), int(rng.integers(24))
        d = float(depth[v, u])
        cam = np.array([(u - 16.0) * d / 80.0, (v - 12.0) * d / 90.0, d])
        expected = rot @ cam + trans
        assert np.allclose(deproject_pixel(frame, u, v), expected, atol=1e-12)


class TestPixelWorldMapping:
    def test_hand_evaluated_affine(self):
        config = TopDownConfig(x_min=0, x_max=1.0, y_min=0, y_max=0.5, resolution=200)
        assert world_to_topdown_px(config, 0.10, 0.20) == (20, 40)

    def test_origin_cell_center(self):
        config = TopDownConfig()
        x, y = topdown_px_to_world(config, 0, 0)
        assert x == pytest.approx(config.x_min + 0.5 / config.resolution)
        assert y == pytest.approx(config.y_min + 0.5 / config.resolution)

    def test_out_of_bounds(self):
        config = TopDownConfig()
        with pytest.raises(OutOfBoundsError):
            world_to_topdown_px(config, config.x_max + 0.01, 0.1)
        with pytest.raises(OutOfBoundsError):
            topdown_px_to_world(config, config.width, 0)

    @given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
    @settings(max_examples=200, deadline=None)
    def test_round_trip_within_half_cell(self, fx, fy):
        # points exactly on a cell edge sit exactly half a cell from the
        # center, so the quantization bound is inclusive
        config = TopDownConfig()
        x = config.x_min + fx * (config.x_max - config.x_min)
        y = config.y_min + fy * (config.y_max - config.y_min)
        u, v = world_to_topdown_px(config, x, y)
        x2, y2 = topdown_px_to_world(config, u, v)
        half_cell = 0.5 / config.resolution
        assert abs(x2 - x) <= half_cell + 1e-12
        assert abs(y2 - y) <= half_cell + 1e-12


class TestNearestFill:
    def test_tie_breaks_to_lowest_row_major(self):
        occ = np.zeros((3, 3), dtype=bool)
        occ[0, 0] = True   # flat index 0
        occ[2, 2] = True   # flat index 8
        src = nearest_fill_indices(occ)
        # center cell (1,1) is equidistant; lowest row-major index wins
        assert src[1, 1] == 0

    @given(st.integers(0, 2 ** 32))
    @settings(max_examples=30, deadline=None)
    def test_matches_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        occ = rng.random((h, w)) < 0.3
        if not occ.any():
            occ[int(rng.integers(h)), int(rng.integers(w))] = True
        got = nearest_fill_indices(occ)
        src_cells = np.argwhere(occ)
        for v in range(h):
            for u in range(w):
                d2 = (src_cells[:, 0] - v) ** 2 + (src_cells[:, 1] - u) ** 2
                best = min((int(d), int(c[0]) * w + int(c[1]))
                           for d, c in zip(d2, src_cells))
                assert got[v, u] == best[1]


class TestBuildTopdown:
    def small_config(self):
        return TopDownConfig(x_min=0, x_max=0.02, y_min=0, y_max=0.02,
                             resolution=100, table_height=0.0)

    def test_single_point_scene(self):
        # one valid pixel deprojects to (0, 0, 0.05): cell (0,0) holds the
        # height, every other cell inherits through nearest fill
        config = self.small_config()
        depth = np.zeros((4, 4), dtype=np.float32)
        depth[2, 2] = 0.05
        rgb = np.zeros((4, 4, 3), dtype=np.uint8)
        rgb[2, 2] = (10, 200, 30)
        intr = CameraIntrinsics(1.0, 1.0, 2.0, 2.0, 4, 4)
        frame = RgbdFrame(rgb, depth, intr, CameraPose.identity())
        obs = build_topdown(frame, config)
        assert obs.heightmap[0, 0] == pytest.approx(0.05)
        assert (obs.rgb == np.array([10, 200, 30])).all()

    def test_z_buffer_keeps_higher_point(self):
        config = self.small_config()
        # two pixels deproject into the same cell at different heights
        depth = np.zeros((4, 4), dtype=np.float32)
        depth[2, 2] = 0.02
        depth[1, 1] = 0.07
        rgb = np.zeros((4, 4, 3), dtype=np.uint8)
        rgb[2, 2] = (1, 1, 1)
        rgb[1, 1] = (9, 9, 9)
        # fx huge -> all rays ~parallel to z, both land in cell (0, 0)
        intr = CameraIntrinsics(1e6, 1e6, 0.0, 0.0, 4, 4)
        frame = RgbdFrame(rgb, depth, intr, CameraPose.identity())
        obs = build_topdown(frame, config)
        assert obs.heightmap[0, 0] == pytest.approx(0.07)
        assert tuple(obs.rgb[0, 0]) == (9, 9, 9)

    def test_dense_plane_is_flat(self):
        # analytic plane at the table height seen from a tilted camera
        config = TopDownConfig(x_min=-0.2, x_max=0.2, y_min=-0.2, y_max=0.2,
                               resolution=100, table_height=0.0)
        # camera half a meter up, looking down with a mild tilt
        tilt = 0.2
        down = np.diag([1.0, -1.0, -1.0])
        rx = np.array([[1, 0, 0],
                       [0, np.cos(tilt), -np.sin(tilt)],
                       [0, np.sin(tilt), np.cos(tilt)]])
        rot = rx @ down
        trans = np.array([0.0, 0.0, 0.5])
        intr = CameraIntrinsics(60.0, 60.0, 32.0, 32.0, 64, 64)
        depth = np.zeros((64, 64), dtype=np.float32)
        for v in range(64):
            for u in range(64):
                ray = rot @ np.array([(u - 32.0) / 60.0, (v - 32.0) / 60.0, 1.0])
                if ray[2] >= -1e-6:
                    continue
                d = (0.0 - trans[2]) / ray[2]
                if 0 < d <= 10:
                    depth[v, u] = d
        rgb = np.zeros((64, 64, 3), dtype=np.uint8)
        frame = RgbdFrame(rgb, depth, intr, CameraPose(rot, trans))
        obs = build_topdown(frame, config)
        assert float(obs.heightmap.max()) <= 1e-4

    def test_deterministic(self):
        config = self.small_config()
        rng = np.random.default_rng(5)
        depth = rng.uniform(0.01, 0.2, (8, 8)).astype(np.float32)
        rgb = rng.integers(0, 255, (8, 8, 3), dtype=np.uint8)
        intr = CameraIntrinsics(40.0, 40.0, 4.0, 4.0, 8, 8)
        frame = RgbdFrame(rgb, depth, intr, CameraPose.identity())
        a = build_topdown(frame, config)
        b = build_topdown(frame, config)
        assert np.array_equal(a.rgb, b.rgb)
        assert np.array_equal(a.heightmap, b.heightmap)

    def test_below_table_clipped_to_zero(self):
        config = self.small_config()
        depth = np.zeros((4, 4), dtype=np.float32)
        depth[2, 2] = 0.05
        intr = CameraIntrinsics(1.0, 1.0, 2.0, 2.0, 4, 4)
        frame = make_frame(depth, intr=intr)
        # table above the observed point: raw height would be negative
        obs = build_topdown(frame, TopDownConfig(
            x_min=0, x_max=0.02, y_min=0, y_max=0.02, resolution=100,
            table_height=0.2))
        assert (obs.heightmap >= 0).all()

    def test_empty_projection(self):
        config = self.small_config()
        frame = make_frame(np.zeros((4, 4), dtype=np.float32))
        with pytest.raises(EmptyProjectionError):
            build_topdown(frame, config)

    def test_points_outside_workspace_rejected(self):
        config = self.small_config()
        depth = np.full((4, 4), 5.0, dtype=np.float32)
        intr = CameraIntrinsics(1.0, 1.0, 0.0, 0.0, 4, 4)
        # camera a meter off to the side: everything lands outside 2 cm
        pose = CameraPose(np.eye(3), np.array([1.0, 1.0, 0.0]))
        frame = make_frame(depth, intr=intr, pose=pose)
        with pytest.raises(EmptyProjectionError):
            build_topdown(frame, config)
