"""One camera, one static target, short horizon: small enough to solve exactly.

``OptimalPlanner`` enumerates every joint action at every step of the
remaining horizon (with memoization on the camera pose, the only part of
the state that actions change) and returns exact finite-horizon action
values. ``greedy_match_rate`` replays a trained greedy policy and counts the
steps at which its choice attains the planner's optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import (EvalConfig, NetworkConfig, NoiseConfig, PerceptionConfig, RewardConfig,
                     RunConfig, TrainerConfig, WorldConfig)
from .neuralnet import NetworkParams
from .perception import ObservationEncoder
from .reward import compute_rewards
from .rollout import QPolicy, observe, one_hot_actions
from .geometry import GroundPoint
from .simenv import ALL_ACTIONS, SoccerCourt, TargetState, WorldState

TOY_HORIZON = 5


TOY_BEARINGS_DEG = (-40.0, -30.0, -15.0, 0.0, 15.0, 30.0, 40.0)
TOY_DISTANCES = (900.0, 1100.0, 1300.0)


def toy_config(seed: int = 0) -> RunConfig:
    """Fixed-position camera on a court corner, coarse 45 degree rotation, zoom in [1, 2]."""
    world = WorldConfig(court_half_x=1200.0, court_half_y=1200.0, n_targets=1, n_cameras=1,
                        camera_height=100.0, episode_length=TOY_HORIZON, target_speed=0.0,
                        translation_step=0.0, rotation_step_deg=45.0, zoom_min=1.0,
                        zoom_max=2.0)
    # a decaying learning rate settles the small late-step action gaps
    trainer = TrainerConfig(gamma=0.5, lr=0.001, lr_end=0.00002, lr_decay_steps=150000,
                            batch_episodes=32, buffer_capacity=2000, eps_start=1.0,
                            eps_end=0.1, eps_anneal_steps=20000, target_sync_episodes=100,
                            total_steps=150000, checkpoint_every_episodes=10000,
                            progress_every_episodes=500)
    return RunConfig(env=world, perception=PerceptionConfig(noise=NoiseConfig(enabled=False)),
                     reward=RewardConfig(), network=NetworkConfig(32, 32, 32, 32),
                     trainer=trainer, eval=EvalConfig(n_runs=50), seed=seed, outdir="runs/toy")


class ToyCourt(SoccerCourt):
    """Single-camera court with the target spawned on a finite set of placements.

    The target sits at one of ``bearings`` (degrees off the camera's initial
    heading) and one of ``distances`` from the camera, drawn uniformly from
    the seed. A finite state set keeps every optimal action-value margin
    bounded away from zero, which a continuous spawn cannot do.
    """

    def __init__(self, config: WorldConfig, bearings=TOY_BEARINGS_DEG, distances=TOY_DISTANCES):
        super().__init__(config)
        if config.n_cameras != 1 or config.n_targets != 1:
            raise ValueError("the toy court has exactly one camera and one target")
        self.bearings = tuple(bearings)
        self.distances = tuple(distances)
        cam = self.initial_cameras()[0]
        for b in self.bearings:
            for d in self.distances:
                x, y = self._placement(cam, b, d)
                if abs(x) > config.court_half_x or abs(y) > config.court_half_y:
                    raise ValueError(f"placement ({b} deg, {d}) falls outside the court")

    @staticmethod
    def _placement(cam, bearing_deg: float, distance: float) -> tuple[float, float]:
        heading = cam.yaw + math.radians(bearing_deg)
        return cam.x + distance * math.cos(heading), cam.y + distance * math.sin(heading)

    def placements(self) -> list[tuple[float, float]]:
        cam = self.initial_cameras()[0]
        return [self._placement(cam, b, d) for b in self.bearings for d in self.distances]

    def reset(self, seed: int) -> WorldState:
        rng = np.random.Generator(np.random.PCG64(seed))
        cams = self.initial_cameras()
        b = self.bearings[int(rng.integers(len(self.bearings)))]
        d = self.distances[int(rng.integers(len(self.distances)))]
        p = GroundPoint(*self._placement(cams[0], b, d))
        return WorldState((TargetState(p, p, 0),), cams, 0, rng.bit_generator.state)


class OptimalPlanner:
    """Exact discounted finite-horizon action values for a single-camera world."""

    def __init__(self, cfg: RunConfig):
        if cfg.env.n_cameras != 1:
            raise ValueError("the planner enumerates a single camera's actions")
        self.cfg = cfg
        self.env = ToyCourt(cfg.env)
        self.encoder = ObservationEncoder(cfg.env, cfg.perception.max_slots)
        self.gamma = cfg.trainer.gamma
        self._noise = NoiseConfig(enabled=False)
        self._cache: dict = {}
        self._rewards: dict = {}
        self._targets = None

    def _key(self, state: WorldState):
        p = state.cameras[0]
        return (round(p.perimeter_s, 6), round(math.cos(p.yaw), 9),
                round(math.sin(p.yaw), 9), round(p.zoom, 9),
                self.env.config.episode_length - state.step_index)

    def _reward(self, state: WorldState) -> float:
        key = self._key(state)[:4]
        r = self._rewards.get(key)
        if r is None:
            r = self._rewards[key] = self._compute_reward(state)
        return r

    def _compute_reward(self, state: WorldState) -> float:
        obs = observe(self.env, state, self.encoder, self._noise, np.random.default_rng(0))
        rb = compute_rewards(obs.visibility, obs.boxes, obs.detections, state.cameras,
                             self.env.config.frame_area, self.cfg.reward)
        return float(rb.total[0])

    def _successor(self, state: WorldState, action) -> WorldState:
        # targets are static, so only the camera pose and step counter move
        pose = self.env.apply_action(state.cameras[0], action)
        return WorldState(state.targets, (pose,), state.step_index + 1, state.rng_state)

    def action_values(self, state: WorldState) -> np.ndarray:
        """(27,) optimal values of each joint action from ``state``, in ALL_ACTIONS order."""
        if state.targets != self._targets:
            self._cache.clear()
            self._rewards.clear()
            self._targets = state.targets
        return self._q(state)

    def _q(self, state: WorldState) -> np.ndarray:
        key = self._key(state)
        if key in self._cache:
            return self._cache[key]
        q = np.empty(len(ALL_ACTIONS))
        for k, a in enumerate(ALL_ACTIONS):
            nxt = self._successor(state, a)
            q[k] = self._reward(nxt)
            if not self.env.done(nxt):
                q[k] += self.gamma * self._q(nxt).max()
        self._cache[key] = q
        return q

    def value(self, state: WorldState) -> float:
        return float(self.action_values(state).max())


@dataclass
class MatchReport:
    matched: int
    steps: int
    per_seed: list[float]

    @property
    def rate(self) -> float:
        return self.matched / self.steps if self.steps else 0.0


def _action_index(indices) -> int:
    a = ALL_ACTIONS[0].from_indices(indices)
    return ALL_ACTIONS.index(a)


def greedy_match_rate(params: NetworkParams, cfg: RunConfig, seeds, tol: float = 1e-9) -> MatchReport:
    """Share of greedy steps whose joint action is optimal under the planner.

    An action counts as optimal when its exact value is within ``tol`` of the
    best, so exact ties (for example zooming while the box term is capped)
    are all accepted.
    """
    planner = OptimalPlanner(cfg)
    env, encoder = planner.env, planner.encoder
    noise = NoiseConfig(enabled=False)
    rng = np.random.default_rng(0)  # unused at epsilon 0, but act() expects one
    matched = steps = 0
    per_seed = []
    for seed in seeds:
        state = env.reset(seed)
        policy = QPolicy(params, 0.0)
        policy.reset(1)
        last = np.zeros((1, 9))
        hits = 0
        for _ in range(cfg.env.episode_length):
            feats = observe(env, state, encoder, noise, np.random.default_rng(0)).features
            idx = policy.act(feats, last, rng)
            q = planner.action_values(state)
            hits += bool(q[_action_index(idx[0])] >= q.max() - tol * max(1.0, abs(q.max())))
            state = env.step(state, [ALL_ACTIONS[_action_index(idx[0])]])
            last = one_hot_actions(idx)
        matched += hits
        steps += cfg.env.episode_length
        per_seed.append(hits / cfg.env.episode_length)
    return MatchReport(matched, steps, per_seed)


__all__ = ["TOY_HORIZON", "toy_config", "OptimalPlanner", "ToyCourt", "greedy_match_rate", "MatchReport"]
