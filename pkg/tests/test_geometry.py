import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camcover.geometry import (CameraModel, CameraPose, HorizonError, build_extrinsics,
                               build_intrinsics, inverse_project_ground, project, project_points,
                               wrap_angle, yaw_error)


def pose(x=0.0, y=-2500.0, h=500.0, yaw=math.pi / 2, pitch=0.0, zoom=1.0):
    return CameraPose(0.0, x, y, h, yaw, pitch, zoom)


@pytest.fixture
def cam():
    return CameraModel.from_pose(pose())


def brute_projection(p: CameraPose, point, zoom=1.0):
    """Build [K | 0] [[R, T], [0, 1]] by hand from the axis vectors and multiply."""
    yaw, pitch = p.yaw, p.pitch
    fwd = np.array([math.cos(pitch) * math.cos(yaw), math.cos(pitch) * math.sin(yaw), math.sin(pitch)])
    right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
    down = np.cross(fwd, right)
    R = np.vstack([right, down, fwd])
    T = -R @ np.array([p.x, p.y, p.height])
    ext = np.eye(4)
    ext[:3, :3], ext[:3, 3] = R, T
    f = 320.0 * zoom
    K0 = np.array([[f, 0, 320, 0], [0, f, 240, 0], [0, 0, 1, 0]])
    zu = K0 @ ext @ np.append(point, 1.0)
    return zu[0] / zu[2], zu[1] / zu[2], zu[2]


class TestIntrinsics:
    def test_default_frame(self):
        k = build_intrinsics(1.0, 640, 480, math.pi / 2)
        assert k.f_x == pytest.approx(320) and k.f_y == pytest.approx(320)
        assert (k.u_0, k.v_0) == (320, 240)

    @pytest.mark.parametrize("zoom,f", [(2.0, 640.0), (1.1, 352.0), (0.5, 160.0)])
    def test_linear_in_zoom(self, zoom, f):
        assert build_intrinsics(zoom, 640, 480, math.pi / 2).f_x == pytest.approx(f)

    @pytest.mark.parametrize("zoom,fov", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, math.pi)])
    def test_rejects_degenerate(self, zoom, fov):
        with pytest.raises(ValueError):
            build_intrinsics(zoom, 640, 480, fov)

    def test_independent_of_pose(self):
        a = CameraModel.from_pose(pose(x=100, y=7, yaw=0.3, pitch=-0.4))
        b = CameraModel.from_pose(pose(x=-900, y=2500, yaw=2.0, pitch=-0.1))
        assert a.intrinsics == b.intrinsics


class TestExtrinsics:
    def test_center_maps_to_origin(self):
        p = pose()
        e = build_extrinsics(p)
        np.testing.assert_allclose(e.R @ p.center + e.T, 0.0, atol=1e-9)

    def test_identity_orientation(self):
        e = build_extrinsics(CameraPose(0, 0, 0, 0, math.pi / 2, math.pi / 2))
        np.testing.assert_allclose(e.R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(e.T, 0.0, atol=1e-12)

    @given(st.floats(-10, 10), st.floats(-1.5, 1.5))
    def test_orthonormal(self, yaw, pitch):
        R = build_extrinsics(pose(yaw=yaw, pitch=pitch)).R
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)
        assert np.linalg.det(R) == pytest.approx(1.0)


class TestProject:
    def test_optical_axis_hits_principal_point(self, cam):
        px = project(cam, (0, 0, 500))
        assert (px.u, px.v) == pytest.approx((320, 240))

    def test_ground_origin(self, cam):
        px = project(cam, (0, 0, 0))
        ref = brute_projection(pose(), np.zeros(3))
        assert (px.u, px.v, px.z_c) == pytest.approx(ref)
        assert (px.u, px.v, px.z_c) == pytest.approx((320, 304, 2500))

    def test_behind_camera(self, cam):
        assert project(cam, (0, -3000, 500)) is None

    def test_matches_matrix_product(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            p = pose(x=rng.uniform(-5000, 5000), y=rng.uniform(-2500, 2500),
                     yaw=rng.uniform(-math.pi, math.pi), pitch=rng.uniform(-1.0, 0.0),
                     zoom=rng.uniform(0.5, 2.0))
            c = CameraModel.from_pose(p)
            pt = rng.uniform(-6000, 6000, size=3)
            got = project(c, pt)
            u, v, z = brute_projection(p, pt, p.zoom)
            if z <= 0:
                assert got is None
            else:
                assert (got.u, got.v, got.z_c) == pytest.approx((u, v, z), rel=1e-9, abs=1e-6)

    def test_zoom_scales_offsets(self):
        pt = np.array([300.0, 800.0, 50.0])
        a = project(CameraModel.from_pose(pose(zoom=1.0)), pt)
        b = project(CameraModel.from_pose(pose(zoom=2.0)), pt)
        assert b.u - 320 == pytest.approx(2 * (a.u - 320))
        assert b.v - 240 == pytest.approx(2 * (a.v - 240))


class TestInverseProject:
    def test_round_trip_example(self, cam):
        g = inverse_project_ground(cam, (320, 304))
        assert g == pytest.approx((0, 0), abs=1e-9)

    def test_horizon_row_rejected(self, cam):
        # pitch 0 at height 500: the principal row is the horizon
        with pytest.raises(HorizonError):
            inverse_project_ground(cam, (320, 240))

    def test_above_horizon_rejected(self, cam):
        with pytest.raises(HorizonError):
            inverse_project_ground(cam, (100, 10))

    @settings(max_examples=300)
    @given(st.floats(-math.pi, math.pi), st.floats(-1.4, -0.01), st.floats(50, 2000),
           st.floats(0.5, 2.0), st.floats(-8000, 8000), st.floats(-8000, 8000))
    def test_round_trip_property(self, yaw, pitch, height, zoom, gx, gy):
        c = CameraModel.from_pose(pose(x=0, y=0, h=height, yaw=yaw, pitch=pitch, zoom=zoom))
        px = project(c, (gx, gy, 0.0))
        if px is None or px.z_c < 1.0:
            return
        g = inverse_project_ground(c, (px.u, px.v))
        assert g == pytest.approx((gx, gy), abs=1e-6)


class TestYawError:
    def test_aligned(self):
        assert yaw_error(pose(yaw=math.pi / 2), (0, 0)) == pytest.approx(0)

    def test_quarter_turn(self):
        assert abs(yaw_error(pose(yaw=math.pi), (0, 0))) == pytest.approx(math.pi / 2)

    def test_wraps(self):
        p = CameraPose(0, 0, 0, 500, math.radians(350), 0)
        target = (math.cos(math.radians(10)), math.sin(math.radians(10)))
        assert abs(yaw_error(p, target)) == pytest.approx(math.radians(20))

    def test_coincident_rejected(self):
        with pytest.raises(ValueError):
            yaw_error(pose(), (0, -2500))

    @given(st.floats(-100, 100))
    def test_wrap_range(self, a):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_project_points_vectorized_matches_scalar(cam):
    pts = np.array([[0, 0, 0], [100, 300, 20], [-500, 1000, 180.0]])
    uv, z = project_points(cam, pts)
    for row, (u, v), zc in zip(pts, uv, z):
        px = project(cam, row)
        assert (px.u, px.v, px.z_c) == pytest.approx((u, v, zc))
