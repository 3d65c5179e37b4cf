"""Pinhole camera model for cameras looking at a ground plane.

World frame: origin at court center, z up, targets live on z = 0.
Camera frame: x right, y down, z along the optical axis. Pixels have the
origin at the top-left corner with v growing downward.

    Z_c [u, v, 1]^T = K [R | T] [x, y, z, 1]^T

On the ground plane this collapses to the homography H = K [r1 r2 T], which
is what ``inverse_project_ground`` inverts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class HorizonError(ValueError):
    """Raised when a pixel ray does not hit the ground in front of the camera."""


class GroundPoint(NamedTuple):
    x: float
    y: float


class PixelPoint(NamedTuple):
    u: float
    v: float
    z_c: float


@dataclass(frozen=True)
class CameraPose:
    """Camera pose on the court border.

    ``perimeter_s`` is the arc-length coordinate the simulator moves along;
    ``x``/``y`` are derived from it and cached here so that geometry does not
    need to know the court layout.
    """

    perimeter_s: float
    x: float
    y: float
    height: float
    yaw: float
    pitch: float
    zoom: float = 1.0

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y, self.height])


@dataclass(frozen=True)
class Intrinsics:
    f_x: float
    f_y: float
    u_0: float
    v_0: float

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.f_x, 0.0, self.u_0],
                         [0.0, self.f_y, self.v_0],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Extrinsics:
    R: np.ndarray  # world -> camera rotation
    T: np.ndarray  # world -> camera translation, T = -R C


@dataclass(frozen=True)
class CameraModel:
    intrinsics: Intrinsics
    extrinsics: Extrinsics
    frame_width: int
    frame_height: int

    @classmethod
    def from_pose(cls, pose: CameraPose, frame_width: int = 640, frame_height: int = 480,
                  base_hfov: float = math.pi / 2) -> "CameraModel":
        return cls(build_intrinsics(pose.zoom, frame_width, frame_height, base_hfov),
                   build_extrinsics(pose), frame_width, frame_height)

    @property
    def projection_matrix(self) -> np.ndarray:
        """3x4 matrix K [R | T]."""
        e = self.extrinsics
        return self.intrinsics.K @ np.hstack([e.R, e.T[:, None]])

    @property
    def ground_homography(self) -> np.ndarray:
        """3x3 matrix K [r1 r2 T] mapping (x, y, 1) on z = 0 to Z_c (u, v, 1)."""
        e = self.extrinsics
        return self.intrinsics.K @ np.column_stack([e.R[:, 0], e.R[:, 1], e.T])


def build_intrinsics(zoom: float, frame_width: int, frame_height: int,
                     base_hfov: float) -> Intrinsics:
    if not zoom > 0:
        raise ValueError(f"zoom must be positive, got {zoom}")
    if not 0.0 < base_hfov < math.pi:
        raise ValueError(f"horizontal field of view must lie in (0, pi), got {base_hfov}")
    f = zoom * (frame_width / 2.0) / math.tan(base_hfov / 2.0)
    return Intrinsics(f, f, frame_width / 2.0, frame_height / 2.0)


def camera_rotation(yaw: float, pitch: float) -> np.ndarray:
    """Rows are the camera right, down and forward axes in world coordinates.

    yaw is the heading of the optical axis measured counter-clockwise from +x;
    negative pitch tilts the camera toward the ground.
    """
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    return np.array([[sy, -cy, 0.0],               # right
                     [sp * cy, sp * sy, -cp],      # down = forward x right
                     [cp * cy, cp * sy, sp]])      # forward


def build_extrinsics(pose: CameraPose) -> Extrinsics:
    R = camera_rotation(pose.yaw, pose.pitch)
    return Extrinsics(R, -R @ pose.center)


def project_points(cam: CameraModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of (N, 3) world points.

    Returns pixel coordinates (N, 2) and camera-frame depth (N,). Pixels of
    points with non-positive depth are meaningless; check the depth.
    """
    e = cam.extrinsics
    pc = np.asarray(points, dtype=float) @ e.R.T + e.T
    z = pc[:, 2]
    k = cam.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.f_x * pc[:, 0] / z + k.u_0
        v = k.f_y * pc[:, 1] / z + k.v_0
    return np.column_stack([u, v]), z


def project(cam: CameraModel, world_point) -> PixelPoint | None:
    uv, z = project_points(cam, np.asarray(world_point, dtype=float).reshape(1, 3))
    if not z[0] > 0:
        return None
    return PixelPoint(float(uv[0, 0]), float(uv[0, 1]), float(z[0]))


# rays this close to parallel with the ground are treated as horizon rays
_HORIZON_RATIO = 1e-9


def inverse_project_ground_many(cam: CameraModel, pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map (N, 2) pixels to ground points.

    Returns ground coordinates (N, 2) and a validity mask; invalid rows
    (horizon or above, or intersection behind the camera) hold NaN.
    """
    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    hom = np.column_stack([pixels, np.ones(len(pixels))])
    # H (x, y, 1) = Z_c (u, v, 1)  =>  H^-1 (u, v, 1) = (x, y, 1) / Z_c
    w = np.linalg.solve(cam.ground_homography, hom.T).T
    scale = np.maximum(np.abs(w[:, 0]), np.abs(w[:, 1]))
    ok = (w[:, 2] > _HORIZON_RATIO * scale) & np.all(np.isfinite(w), axis=1)
    xy = np.full((len(pixels), 2), np.nan)
    xy[ok] = w[ok, :2] / w[ok, 2:3]
    return xy, ok


def inverse_project_ground(cam: CameraModel, pixel) -> GroundPoint:
    xy, ok = inverse_project_ground_many(cam, np.asarray(pixel, dtype=float)[:2])
    if not ok[0]:
        raise HorizonError(f"pixel {tuple(pixel)} does not map to ground in front of the camera")
    return GroundPoint(float(xy[0, 0]), float(xy[0, 1]))


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def yaw_error(cam_pose: CameraPose, ground_point) -> float:
    """Signed yaw from the bearing of ``ground_point`` to the camera heading."""
    dx = ground_point[0] - cam_pose.x
    dy = ground_point[1] - cam_pose.y
    if dx == 0.0 and dy == 0.0:
        raise ValueError("ground point coincides with the camera ground position")
    return wrap_angle(cam_pose.yaw - math.atan2(dy, dx))
