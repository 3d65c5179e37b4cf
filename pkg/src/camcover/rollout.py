"""Observation pipeline and policies, with the single-episode rollout loop built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NoiseConfig, RewardConfig
from .neuralnet import NetworkParams, forward_sequence
from .perception import (AgentObservation, Detection, ObservationEncoder,
                         build_joint_observation, detect, estimate_coordinates)
from .reward import RewardBreakdown, compute_rewards
from .simenv import Action, BoundingBox, SoccerCourt, WorldState

REWARD_TERMS = ("team", "box", "vis", "dir", "pos", "total")


@dataclass
class StepObservation:
    boxes: list[list[BoundingBox]]        # ground truth, per camera
    visibility: np.ndarray                # (n, m) from ground-truth boxes
    detections: list[list[Detection]]     # after detector noise + inverse projection
    joint: list[AgentObservation]
    features: np.ndarray                  # (n, feature_size)


def observe(env: SoccerCourt, state: WorldState, encoder: ObservationEncoder,
            noise: NoiseConfig, rng: np.random.Generator) -> StepObservation:
    c = env.config
    boxes = env.all_bboxes(state)
    vis = env.visibility_flags(state, boxes)
    detections = []
    for i, pose in enumerate(state.cameras):
        seen = detect(boxes[i], noise, rng, c.frame_width, c.frame_height)
        detections.append(estimate_coordinates(seen, env.camera_model(pose)))
    joint = build_joint_observation(state, detections)
    return StepObservation(boxes, vis, detections, joint, encoder.encode_all(joint))


def one_hot_actions(indices: np.ndarray) -> np.ndarray:
    """(..., 3) branch indices -> (..., 9) concatenated one-hots."""
    indices = np.asarray(indices, dtype=int)
    out = np.zeros(indices.shape[:-1] + (9,))
    for b in range(3):
        np.put_along_axis(out, 3 * b + indices[..., b:b + 1], 1.0, axis=-1)
    return out


def select_actions(q: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Per-agent, per-branch epsilon-greedy over (n, 3, 3) Q-values.

    Returns (n, 3) branch indices; argmax ties go to the lowest index.
    """
    q = np.asarray(q)
    explore = rng.random(q.shape[:2]) < epsilon
    random_idx = rng.integers(0, 3, size=q.shape[:2])
    return np.where(explore, random_idx, np.argmax(q, axis=-1))


class QPolicy:
    """Epsilon-greedy policy over the shared recurrent Q-network."""

    def __init__(self, params: NetworkParams, epsilon: float = 0.0):
        self.params = params
        self.epsilon = epsilon
        self.hidden = None

    def reset(self, n_agents: int) -> None:
        self.hidden = np.zeros((1, n_agents, self.params.topology.hidden))

    def q_values(self, features: np.ndarray, last_onehot: np.ndarray) -> np.ndarray:
        q, self.hidden, _ = forward_sequence(self.params, features[None, None],
                                             last_onehot[None, None], self.hidden,
                                             keep_trace=False)
        return q[0, 0]

    def act(self, features, last_onehot, rng) -> np.ndarray:
        return select_actions(self.q_values(features, last_onehot), self.epsilon, rng)


class FixedCameraPolicy:
    """Cameras stay where reset put them: on the border facing the center."""

    def reset(self, n_agents: int) -> None:
        self.n = n_agents

    def act(self, features, last_onehot, rng) -> np.ndarray:
        return np.ones((self.n, 3), dtype=int)


fixed_baseline_policy = FixedCameraPolicy


@dataclass
class EpisodeResult:
    observations: np.ndarray   # (T + 1, n, F)
    actions: np.ndarray        # (T, n, 3) branch indices
    rewards: np.ndarray        # (T, n) total per agent
    visibility: np.ndarray     # (T, n, m) for states s_1 .. s_T
    term_means: dict[str, float]
    final_state: WorldState


def run_episode(env: SoccerCourt, encoder: ObservationEncoder, policy, seed: int,
                reward_cfg: RewardConfig, noise: NoiseConfig,
                action_rng: np.random.Generator) -> EpisodeResult:
    c = env.config
    n, T = c.n_cameras, c.episode_length
    state = env.reset(seed)
    noise_rng = np.random.Generator(np.random.PCG64([seed, 7]))
    obs = observe(env, state, encoder, noise, noise_rng)
    policy.reset(n)
    feats = np.empty((T + 1, n, encoder.feature_size))
    actions = np.empty((T, n, 3), dtype=np.int64)
    rewards = np.empty((T, n))
    vis_hist = np.empty((T, n, c.n_targets), dtype=np.int8)
    sums = dict.fromkeys(REWARD_TERMS, 0.0)
    feats[0] = obs.features
    last = np.zeros((n, 9))
    for t in range(T):
        a = np.asarray(policy.act(obs.features, last, action_rng), dtype=np.int64)
        state = env.step(state, [Action.from_indices(ai) for ai in a])
        obs = observe(env, state, encoder, noise, noise_rng)
        rb: RewardBreakdown = compute_rewards(obs.visibility, obs.boxes, obs.detections,
                                              state.cameras, c.frame_area, reward_cfg)
        actions[t] = a
        rewards[t] = rb.total
        vis_hist[t] = obs.visibility
        feats[t + 1] = obs.features
        last = one_hot_actions(a)
        sums["team"] += rb.team
        sums["box"] += rb.box.mean()
        sums["vis"] += rb.visibility.mean()
        sums["dir"] += rb.direction.mean()
        sums["pos"] += rb.position.mean()
        sums["total"] += rb.total.mean()
    means = {k: v / T for k, v in sums.items()}
    return EpisodeResult(feats, actions, rewards, vis_hist, means, state)
