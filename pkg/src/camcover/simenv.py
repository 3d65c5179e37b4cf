"""Soccer-court world: random-walk targets and cameras sliding on the border.

``SoccerCourt`` holds only the immutable config. ``WorldState`` is a value:
``step`` returns a new state and never mutates its input. The random
generator state travels inside the world state, so a state plus a joint
action fully determines the successor.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np

from .config import WorldConfig
from .geometry import (CameraModel, CameraPose, GroundPoint, project_points,
                       wrap_angle)


@dataclass(frozen=True)
class TargetState:
    position: GroundPoint
    destination: GroundPoint
    steps_since_destination: int = 0


@dataclass(frozen=True)
class Action:
    a_m: int = 0  # translation along the border
    a_r: int = 0  # yaw rotation
    a_z: int = 0  # zoom

    def __post_init__(self):
        for v in (self.a_m, self.a_r, self.a_z):
            if v not in (-1, 0, 1):
                raise ValueError(f"action components must be -1, 0 or +1, got {self}")

    @classmethod
    def from_indices(cls, idx: Sequence[int]) -> "Action":
        """Branch indices 0, 1, 2 map to components -1, 0, +1."""
        return cls(int(idx[0]) - 1, int(idx[1]) - 1, int(idx[2]) - 1)

    @property
    def indices(self) -> tuple[int, int, int]:
        return (self.a_m + 1, self.a_r + 1, self.a_z + 1)


ALL_ACTIONS: tuple[Action, ...] = tuple(
    Action(*c) for c in itertools.product((-1, 0, 1), repeat=3))
NOOP = Action(0, 0, 0)


@dataclass(frozen=True)
class BoundingBox:
    u_min: float
    v_min: float
    u_max: float
    v_max: float
    target_id: int
    truncated: bool = False  # clipped by the frame border

    @property
    def area(self) -> float:
        return max(self.u_max - self.u_min, 0.0) * max(self.v_max - self.v_min, 0.0)

    @property
    def bottom_mid(self) -> tuple[float, float]:
        return ((self.u_min + self.u_max) / 2.0, self.v_max)


@dataclass(frozen=True)
class WorldState:
    targets: tuple[TargetState, ...]
    cameras: tuple[CameraPose, ...]
    step_index: int
    rng_state: dict[str, Any]

    def target_positions(self) -> np.ndarray:
        return np.array([t.position for t in self.targets], dtype=float).reshape(-1, 2)

    def camera_positions(self) -> np.ndarray:
        return np.array([(c.x, c.y) for c in self.cameras], dtype=float).reshape(-1, 2)


def _rng_from_state(state: dict[str, Any]) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)


def advance_target(t: TargetState, speed: float, timeout: int, rng: np.random.Generator,
                   half_x: float, half_y: float) -> TargetState:
    px, py = t.position
    dx, dy = t.destination[0] - px, t.destination[1] - py
    dist = math.hypot(dx, dy)
    if dist <= speed:
        pos = GroundPoint(*t.destination)
        arrived = True
    else:
        pos = GroundPoint(px + speed * dx / dist, py + speed * dy / dist)
        arrived = False
    count = t.steps_since_destination + 1
    if arrived or count > timeout:
        dest = GroundPoint(float(rng.uniform(-half_x, half_x)), float(rng.uniform(-half_y, half_y)))
        return TargetState(pos, dest, 0)
    return TargetState(pos, t.destination, count)


class SoccerCourt:
    def __init__(self, config: WorldConfig | None = None):
        self.config = config or WorldConfig()
        self.config.validate()
        c = self.config
        w, h, d = c.target_width / 2, c.target_depth / 2, c.target_height
        # upright solid footprint centered on the target ground position
        self._corners = np.array([[sx * w, sy * h, sz * d]
                                  for sx in (-1, 1) for sy in (-1, 1) for sz in (0, 1)])
        self._models: dict[CameraPose, CameraModel] = {}

    # -- camera kinematics -------------------------------------------------

    def border_point(self, s: float) -> tuple[float, float]:
        """Point at arc length ``s`` counter-clockwise from the (-x, -y) corner."""
        hx, hy = self.config.court_half_x, self.config.court_half_y
        s = s % self.config.perimeter
        lx, ly = 2 * hx, 2 * hy
        if s < lx:
            return (-hx + s, -hy)
        s -= lx
        if s < ly:
            return (hx, -hy + s)
        s -= ly
        if s < lx:
            return (hx - s, hy)
        s -= lx
        return (-hx, hy - s)

    def make_pose(self, s: float, yaw: float, zoom: float) -> CameraPose:
        s = s % self.config.perimeter
        x, y = self.border_point(s)
        return CameraPose(s, x, y, self.config.camera_height, wrap_angle(yaw),
                          self.config.pitch, zoom)

    def apply_action(self, pose: CameraPose, action: Action) -> CameraPose:
        c = self.config
        zoom = pose.zoom * (1.0 + c.zoom_step) ** action.a_z
        zoom = min(max(zoom, c.zoom_min), c.zoom_max)
        return self.make_pose(pose.perimeter_s + action.a_m * c.translation_step,
                              pose.yaw + action.a_r * math.radians(c.rotation_step_deg), zoom)

    def initial_cameras(self) -> tuple[CameraPose, ...]:
        """Evenly spaced on the border, each facing the court center, zoom 1."""
        c = self.config
        spacing = c.perimeter / c.n_cameras
        poses = []
        for k in range(c.n_cameras):
            s = (k + 0.5) * spacing
            x, y = self.border_point(s)
            poses.append(self.make_pose(s, math.atan2(-y, -x), 1.0))
        return tuple(poses)

    def camera_model(self, pose: CameraPose) -> CameraModel:
        model = self._models.get(pose)
        if model is None:
            c = self.config
            model = CameraModel.from_pose(pose, c.frame_width, c.frame_height, c.base_hfov)
            if len(self._models) > 4096:
                self._models.clear()
            self._models[pose] = model
        return model

    # -- transitions -------------------------------------------------------

    def reset(self, seed: int) -> WorldState:
        c = self.config
        rng = np.random.Generator(np.random.PCG64(seed))
        targets = []
        for _ in range(c.n_targets):
            pos = GroundPoint(float(rng.uniform(-c.court_half_x, c.court_half_x)),
                              float(rng.uniform(-c.court_half_y, c.court_half_y)))
            dest = GroundPoint(float(rng.uniform(-c.court_half_x, c.court_half_x)),
                               float(rng.uniform(-c.court_half_y, c.court_half_y)))
            targets.append(TargetState(pos, dest, 0))
        return WorldState(tuple(targets), self.initial_cameras(), 0, rng.bit_generator.state)

    def step(self, state: WorldState, joint_action: Sequence[Action]) -> WorldState:
        c = self.config
        if len(joint_action) != len(state.cameras):
            raise ValueError(f"expected {len(state.cameras)} actions, got {len(joint_action)}")
        if state.step_index >= c.episode_length:
            raise ValueError("episode already finished; call reset")
        cameras = tuple(self.apply_action(p, a) for p, a in zip(state.cameras, joint_action))
        rng = _rng_from_state(state.rng_state)
        targets = tuple(advance_target(t, c.target_speed, c.destination_timeout, rng,
                                       c.court_half_x, c.court_half_y)
                        for t in state.targets)
        return WorldState(targets, cameras, state.step_index + 1, rng.bit_generator.state)

    def done(self, state: WorldState) -> bool:
        return state.step_index >= self.config.episode_length

    # -- observation synthesis ---------------------------------------------

    def synthesize_bboxes(self, state: WorldState, cam_index: int) -> list[BoundingBox]:
        """Ground-truth boxes of every target in front of camera ``cam_index``.

        Each target is an upright solid; the box is the pixel hull of its
        eight projected corners, clipped to the frame. Targets with any corner
        at or behind the image plane, or entirely outside the frame, are
        omitted.
        """
        c = self.config
        cam = self.camera_model(state.cameras[cam_index])
        pos = state.target_positions()
        m = len(pos)
        if m == 0:
            return []
        pts = (np.column_stack([pos, np.zeros(m)])[:, None, :] + self._corners[None]).reshape(-1, 3)
        uv, z = project_points(cam, pts)
        uv = uv.reshape(m, 8, 2)
        front = np.all(z.reshape(m, 8) > 1e-6, axis=1)
        lo = uv.min(axis=1)
        hi = uv.max(axis=1)
        W, H = float(c.frame_width), float(c.frame_height)
        boxes = []
        for j in np.flatnonzero(front):
            u0, v0 = lo[j]
            u1, v1 = hi[j]
            if u1 <= 0.0 or v1 <= 0.0 or u0 >= W or v0 >= H:
                continue
            cu0, cv0 = max(u0, 0.0), max(v0, 0.0)
            cu1, cv1 = min(u1, W), min(v1, H)
            truncated = (cu0, cv0, cu1, cv1) != (u0, v0, u1, v1)
            boxes.append(BoundingBox(float(cu0), float(cv0), float(cu1), float(cv1), int(j), truncated))
        return boxes

    def all_bboxes(self, state: WorldState) -> list[list[BoundingBox]]:
        return [self.synthesize_bboxes(state, i) for i in range(len(state.cameras))]

    def visibility_flags(self, state: WorldState,
                         boxes: list[list[BoundingBox]] | None = None) -> np.ndarray:
        """(n_cameras, n_targets) 0/1 matrix: box area fraction above mu_min."""
        if boxes is None:
            boxes = self.all_bboxes(state)
        return visibility_from_boxes(boxes, len(state.targets), self.config.frame_area,
                                     self.config.mu_min)


def visibility_from_boxes(boxes: list[list[BoundingBox]], n_targets: int, frame_area: float,
                          mu_min: float) -> np.ndarray:
    v = np.zeros((len(boxes), n_targets), dtype=np.int8)
    for i, cam_boxes in enumerate(boxes):
        for b in cam_boxes:
            if b.area / frame_area > mu_min:
                v[i, b.target_id] = 1
    return v


def with_cameras(state: WorldState, cameras: Sequence[CameraPose]) -> WorldState:
    return replace(state, cameras=tuple(cameras))
