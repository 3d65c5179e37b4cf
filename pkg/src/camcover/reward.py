"""Team and individual reward terms.

Per agent i the reward is

    R_i = w_T * team + (1 - w_T) * (box + l_v * vis + l_d * dir + l_p * pos)

with ablations able to drop any individual term, the whole individual part
("team") or the team part ("all-individual" keeps team only).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RewardConfig
from .geometry import CameraPose, yaw_error
from .perception import Detection
from .simenv import BoundingBox

RewardWeights = RewardConfig


@dataclass(frozen=True)
class RewardBreakdown:
    team: float
    box: np.ndarray
    visibility: np.ndarray
    direction: np.ndarray
    position: np.ndarray
    individual: np.ndarray
    total: np.ndarray


def team_reward(v: np.ndarray, m: int | None = None) -> float:
    v = np.asarray(v)
    m = v.shape[1] if m is None else m
    if m <= 0:
        raise ValueError("team reward needs at least one target")
    if v.shape[1] != m:
        raise ValueError(f"visibility matrix has {v.shape[1]} targets, expected {m}")
    if v.shape[0] == 0:
        return 0.0
    return float(v.max(axis=0).sum()) / m


def box_reward(boxes: list[BoundingBox], frame_area: float, mu_max: float) -> float:
    if frame_area <= 0:
        raise ValueError("frame area must be positive")
    frac = sum(b.area for b in boxes) / frame_area
    return min(100.0 * frac, mu_max)


def visibility_reward(v: np.ndarray, i: int) -> float:
    """Targets seen by agent i, each weighted by 1 / (cameras seeing it)."""
    v = np.asarray(v, dtype=float)
    seen = v[i] > 0
    if not seen.any():
        return 0.0
    return float((v[i, seen] / v[:, seen].sum(axis=0)).sum())


def direction_reward(pose: CameraPose, detections: list[Detection], alpha_max: float) -> float:
    if not detections:
        return 0.0
    pts = np.array([d.estimated_coord for d in detections])
    mean = pts.mean(axis=0)
    if mean[0] == pose.x and mean[1] == pose.y:
        return 0.0
    return 1.0 - abs(yaw_error(pose, mean)) / alpha_max


def position_reward(camera_positions: np.ndarray, i: int, d_max: float) -> float:
    pos = np.asarray(camera_positions, dtype=float)
    if len(pos) < 2:
        return 0.0
    d = np.hypot(*(pos - pos[i]).T)
    d = np.delete(d, i)
    return -max((d_max - d.min()) / d_max, 0.0)


def combine(team: float, box, vis, direction, pos, w: RewardConfig):
    """Return (individual, total) for per-agent term arrays."""
    off = set(w.ablate)
    if "all-individual" in off:
        off |= {"vis", "dir", "box", "pos"}
    box = np.asarray(box, dtype=float)
    individual = (
        (0.0 if "box" in off else box)
        + (0.0 if "vis" in off else w.lambda_vis * np.asarray(vis, dtype=float))
        + (0.0 if "dir" in off else w.lambda_dir * np.asarray(direction, dtype=float))
        + (0.0 if "pos" in off else w.lambda_pos * np.asarray(pos, dtype=float))
    ) + np.zeros_like(box)
    if "team" in off:
        total = individual.copy()
    elif "all-individual" in off:
        total = np.full_like(individual, team)
    else:
        total = w.w_team * team + (1.0 - w.w_team) * individual
    return individual, total


def total_reward(breakdown: RewardBreakdown, w: RewardConfig) -> np.ndarray:
    return combine(breakdown.team, breakdown.box, breakdown.visibility,
                   breakdown.direction, breakdown.position, w)[1]


def composition(w: RewardConfig) -> dict[str, float]:
    """Effective multiplier on each term, for logging the ablation in use."""
    off = set(w.ablate)
    if "all-individual" in off:
        return {"team": 1.0, "box": 0.0, "vis": 0.0, "dir": 0.0, "pos": 0.0}
    ind = 1.0 if "team" in off else 1.0 - w.w_team
    return {
        "team": 0.0 if "team" in off else w.w_team,
        "box": 0.0 if "box" in off else ind,
        "vis": 0.0 if "vis" in off else ind * w.lambda_vis,
        "dir": 0.0 if "dir" in off else ind * w.lambda_dir,
        "pos": 0.0 if "pos" in off else ind * w.lambda_pos,
    }


def compute_rewards(v: np.ndarray, boxes: list[list[BoundingBox]],
                    detections: list[list[Detection]], cameras: tuple[CameraPose, ...],
                    frame_area: float, w: RewardConfig) -> RewardBreakdown:
    """All reward terms for one step.

    ``v`` and ``boxes`` are the ground-truth visibility and boxes; the
    direction term uses the agent's own estimated coordinates of targets it
    currently covers.
    """
    n = len(cameras)
    team = team_reward(v)
    pos_xy = np.array([(c.x, c.y) for c in cameras])
    box = np.array([box_reward(boxes[i], frame_area, w.mu_max) for i in range(n)])
    vis = np.array([visibility_reward(v, i) for i in range(n)])
    direction = np.array([
        direction_reward(cameras[i], [d for d in detections[i] if v[i, d.box.target_id]],
                         w.alpha_max)
        for i in range(n)])
    pos = np.array([position_reward(pos_xy, i, w.d_max) for i in range(n)])
    individual, total = combine(team, box, vis, direction, pos, w)
    return RewardBreakdown(team, box, vis, direction, pos, individual, total)


def direction_bounds(alpha_max: float) -> tuple[float, float]:
    return 1.0 - math.pi / alpha_max, 1.0
