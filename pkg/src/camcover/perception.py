"""Boxes -> ground coordinates -> fixed-length per-agent feature blocks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NoiseConfig, WorldConfig
from .geometry import CameraModel, CameraPose, GroundPoint, inverse_project_ground_many
from .simenv import BoundingBox, WorldState

DetectorNoiseModel = NoiseConfig

POSE_FEATURES = 5  # x, y, sin(yaw), cos(yaw), zoom
LAST_ACTION_SIZE = 9


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    estimated_coord: GroundPoint


@dataclass(frozen=True)
class AgentObservation:
    detections: tuple[Detection, ...]
    pose: CameraPose
    distances: tuple[float, ...]  # L1 to every other camera, camera order


@dataclass(frozen=True)
class EncodedInput:
    features: np.ndarray      # encoder input: detection slots, pose, distances
    identity: np.ndarray      # one-hot agent id
    last_action: np.ndarray   # three 3-way one-hots

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.features, self.identity, self.last_action])


def detect(boxes: list[BoundingBox], noise: NoiseConfig, rng: np.random.Generator,
           frame_width: int = 640, frame_height: int = 480) -> list[BoundingBox]:
    """Stand-in detector: drop boxes at random and jitter their corners."""
    if not noise.enabled:
        return list(boxes)
    out = []
    for b in boxes:
        if rng.random() < noise.miss_probability:
            continue
        if noise.pixel_jitter_sigma > 0:
            j = rng.normal(0.0, noise.pixel_jitter_sigma, size=4)
            u0, u1 = sorted((b.u_min + j[0], b.u_max + j[2]))
            v0, v1 = sorted((b.v_min + j[1], b.v_max + j[3]))
            u0, u1 = np.clip([u0, u1], 0.0, frame_width)
            v0, v1 = np.clip([v0, v1], 0.0, frame_height)
            b = BoundingBox(float(u0), float(v0), float(u1), float(v1), b.target_id, b.truncated)
        out.append(b)
    return out


def estimate_coordinates(boxes: list[BoundingBox], cam: CameraModel) -> list[Detection]:
    """Inverse-project each box's bottom-edge midpoint onto the ground."""
    if not boxes:
        return []
    pixels = np.array([b.bottom_mid for b in boxes])
    xy, ok = inverse_project_ground_many(cam, pixels)
    return [Detection(b, GroundPoint(float(p[0]), float(p[1])))
            for b, p, good in zip(boxes, xy, ok) if good]


def build_joint_observation(state: WorldState,
                            all_detections: list[list[Detection]]) -> list[AgentObservation]:
    if len(all_detections) != len(state.cameras):
        raise ValueError("need one detection list per camera")
    pos = state.camera_positions()
    obs = []
    for i, pose in enumerate(state.cameras):
        l1 = np.abs(pos - pos[i]).sum(axis=1)
        dists = tuple(float(l1[j]) for j in range(len(pos)) if j != i)
        obs.append(AgentObservation(tuple(all_detections[i]), pose, dists))
    return obs


def feature_size(n_cameras: int, max_slots: int) -> int:
    return 3 * max_slots + POSE_FEATURES + (n_cameras - 1)


def action_one_hot(indices) -> np.ndarray:
    """Three branch indices (each 0..2) -> 9-vector."""
    out = np.zeros(LAST_ACTION_SIZE)
    for k, a in enumerate(indices):
        out[3 * k + int(a)] = 1.0
    return out


class ObservationEncoder:
    """Normalizes observations into the fixed-size network input."""

    def __init__(self, world: WorldConfig, max_slots: int | None = None):
        self.world = world
        self.max_slots = world.n_targets if max_slots is None else max_slots
        self.n_agents = world.n_cameras

    @property
    def feature_size(self) -> int:
        return feature_size(self.n_agents, self.max_slots)

    def features(self, obs: AgentObservation) -> np.ndarray:
        w = self.world
        hx, hy = w.court_half_x, w.court_half_y
        slots = np.zeros((self.max_slots, 3))
        dets = sorted(obs.detections, key=lambda d: (-d.box.area, d.box.target_id))
        for k, d in enumerate(dets[: self.max_slots]):
            slots[k] = (np.clip(d.estimated_coord.x / hx, -1.0, 1.0),
                        np.clip(d.estimated_coord.y / hy, -1.0, 1.0), 1.0)
        p = obs.pose
        zoom = 2.0 * (p.zoom - w.zoom_min) / max(w.zoom_max - w.zoom_min, 1e-12) - 1.0
        pose = np.array([p.x / hx, p.y / hy, np.sin(p.yaw), np.cos(p.yaw), zoom])
        dist = np.asarray(obs.distances, dtype=float) / (w.perimeter / 2.0)
        return np.concatenate([slots.ravel(), np.clip(pose, -1.0, 1.0), np.clip(dist, -1.0, 1.0)])

    def encode(self, joint: list[AgentObservation], agent_index: int,
               last_actions: np.ndarray | None = None) -> EncodedInput:
        """``last_actions`` is an (n_agents, 3) array of branch indices, or None at t = 0."""
        if not 0 <= agent_index < len(joint):
            raise IndexError(f"agent index {agent_index} out of range")
        identity = np.zeros(self.n_agents)
        identity[agent_index] = 1.0
        last = (np.zeros(LAST_ACTION_SIZE) if last_actions is None
                else action_one_hot(last_actions[agent_index]))
        return EncodedInput(self.features(joint[agent_index]), identity, last)

    def encode_all(self, joint: list[AgentObservation]) -> np.ndarray:
        """(n_agents, feature_size) matrix, the network's per-step input."""
        return np.stack([self.features(o) for o in joint])


def encode(joint: list[AgentObservation], agent_index: int, last_actions: np.ndarray | None,
           world: WorldConfig, max_slots: int | None = None) -> EncodedInput:
    return ObservationEncoder(world, max_slots).encode(joint, agent_index, last_actions)
