"""Double Q-learning over whole episodes with a periodically synced target net.

For every branch b of every agent at step t:

    a*     = argmax_a Q_online_b(s_{t+1}, a)
    target = R_t + gamma * Q_target_b(s_{t+1}, a*)
    loss   = mean (Q_online_b(s_t, a_t,b) - target)^2

Episodes end only by the time limit, so the final transition still
bootstraps.
"""
from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import RunConfig, TrainerConfig
from .neuralnet import (AdamState, NetworkParams, Topology, clip_gradients, decode_checkpoint,
                        encode_checkpoint, forward_sequence, backward, init_params,
                        optimizer_step)
from .perception import ObservationEncoder
from .reward import composition
from .rollout import QPolicy, run_episode, one_hot_actions
from .simenv import SoccerCourt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    inputs: np.ndarray        # (n, F)
    joint_action: np.ndarray  # (n, 3)
    rewards: np.ndarray       # (n,)
    next_inputs: np.ndarray   # (n, F)
    truncated: bool


@dataclass
class EpisodeRecord:
    observations: np.ndarray  # (T + 1, n, F)
    actions: np.ndarray       # (T, n, 3)
    rewards: np.ndarray       # (T, n)

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def transitions(self) -> list[Transition]:
        T = len(self)
        return [Transition(self.observations[t], self.actions[t], self.rewards[t],
                           self.observations[t + 1], t == T - 1) for t in range(T)]

    def last_actions(self) -> np.ndarray:
        """(T + 1, n, 9): zeros at t = 0, then one-hot of the action taken at t - 1."""
        out = np.zeros(self.observations.shape[:2] + (9,))
        out[1:] = one_hot_actions(self.actions)
        return out


class ReplayBuffer:
    """FIFO ring of whole episodes."""

    def __init__(self, capacity: int = 2000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._episodes: deque[EpisodeRecord] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._episodes)

    def add(self, episode: EpisodeRecord) -> None:
        self._episodes.append(episode)

    def sample(self, batch: int, rng: np.random.Generator) -> list[EpisodeRecord]:
        idx = rng.choice(len(self._episodes), size=batch, replace=False)
        return [self._episodes[i] for i in idx]

    def __getitem__(self, i: int) -> EpisodeRecord:
        return self._episodes[i]


def epsilon_at(step: int, cfg: TrainerConfig) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    if cfg.eps_anneal_steps <= 0 or step >= cfg.eps_anneal_steps:
        return cfg.eps_end
    frac = step / cfg.eps_anneal_steps
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def lr_at(step: int, cfg: TrainerConfig) -> float:
    """Constant ``lr`` unless ``lr_end`` is set, then linear decay over ``lr_decay_steps``."""
    if cfg.lr_end is None or cfg.lr_decay_steps <= 0:
        return cfg.lr
    frac = min(step / cfg.lr_decay_steps, 1.0)
    return cfg.lr + frac * (cfg.lr_end - cfg.lr)


def td_targets(rewards: np.ndarray, q_online_next: np.ndarray, q_target_next: np.ndarray,
               gamma: float) -> np.ndarray:
    """Per-branch double-Q targets.

    rewards (..., ), Q arrays (..., 3 branches, 3 actions) -> targets (..., 3).
    """
    best = np.argmax(q_online_next, axis=-1)
    evaluated = np.take_along_axis(q_target_next, best[..., None], axis=-1)[..., 0]
    return np.asarray(rewards)[..., None] + gamma * evaluated


def stack_batch(episodes: list[EpisodeRecord]):
    """Time-major arrays: obs (T+1, E, n, F), last (T+1, E, n, 9), actions (T, E, n, 3), rewards (T, E, n)."""
    obs = np.stack([e.observations for e in episodes], axis=1)
    last = np.stack([e.last_actions() for e in episodes], axis=1)
    actions = np.stack([e.actions for e in episodes], axis=1)
    rewards = np.stack([e.rewards for e in episodes], axis=1)
    return obs, last, actions, rewards


def batch_loss_and_grads(online: NetworkParams, target: NetworkParams,
                         episodes: list[EpisodeRecord], gamma: float):
    """Mean squared TD error over (step, episode, agent, branch) and its gradient."""
    obs, last, actions, rewards = stack_batch(episodes)
    T = actions.shape[0]
    q_on, _, trace = forward_sequence(online, obs, last)
    q_tg, _, _ = forward_sequence(target, obs, last, keep_trace=False)
    targets = td_targets(rewards, q_on[1:], q_tg[1:], gamma)
    chosen = np.take_along_axis(q_on[:T], actions[..., None], axis=-1)[..., 0]
    td = chosen - targets
    loss = float(np.mean(td * td))
    dq = np.zeros_like(q_on)
    np.put_along_axis(dq[:T], actions[..., None], (2.0 / td.size * td)[..., None], axis=-1)
    grads = backward(online, trace, dq)
    return loss, grads


def train_step(buffer: ReplayBuffer, online: NetworkParams, target: NetworkParams,
               adam: AdamState, cfg: TrainerConfig, rng: np.random.Generator,
               lr: float | None = None) -> float | None:
    """One optimizer update from a sampled batch; None when the buffer is too small."""
    if len(buffer) < cfg.batch_episodes:
        return None
    batch = buffer.sample(cfg.batch_episodes, rng)
    loss, grads = batch_loss_and_grads(online, target, batch, cfg.gamma)
    grads, _ = clip_gradients(grads, cfg.grad_clip)
    optimizer_step(online, grads, adam, cfg.lr if lr is None else lr)
    return loss


def sync_target(online: NetworkParams, target: NetworkParams, episode_count: int, k: int) -> bool:
    """Copy online weights into ``target`` in place when episode_count % k == 0."""
    if episode_count % k != 0:
        return False
    for name, arr in online.arrays.items():
        target.arrays[name][...] = arr
    return True


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, 1, episode]).generate_state(1)[0])


def init_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 0]).generate_state(1)[0])


def build_topology(cfg: RunConfig) -> Topology:
    enc = ObservationEncoder(cfg.env, cfg.perception.max_slots)
    n = cfg.network
    return Topology(cfg.env.n_cameras, enc.feature_size, n.enc1, n.enc2, n.trunk, n.hidden)


@dataclass
class TrainerState:
    online: NetworkParams
    target: NetworkParams
    adam: AdamState
    step: int = 0
    episode: int = 0
    metrics: list[dict] = field(default_factory=list)

    def checkpoint_bytes(self, cfg: TrainerConfig) -> bytes:
        arrays = dict(self.online.arrays)
        for prefix, src in (("target/", self.target.arrays), ("adam_m/", self.adam.m),
                            ("adam_v/", self.adam.v)):
            arrays.update({prefix + k: v for k, v in src.items()})
        meta = {"step": self.step, "episode": self.episode,
                "epsilon": epsilon_at(self.step, cfg), "adam_t": self.adam.t,
                "adam_betas": [self.adam.beta1, self.adam.beta2], "adam_eps": self.adam.eps}
        return encode_checkpoint(self.online.topology, arrays, meta)

    @classmethod
    def from_checkpoint(cls, blob: bytes, expected: Topology | None = None) -> "TrainerState":
        topo, arrays, meta = decode_checkpoint(blob, expected)
        names = list(topo.param_shapes())

        def pick(prefix):
            return {k: arrays[prefix + k].copy() for k in names}

        adam = AdamState(pick("adam_m/"), pick("adam_v/"), meta["adam_t"],
                         *meta["adam_betas"], meta["adam_eps"])
        return cls(NetworkParams(topo, pick("")), NetworkParams(topo, pick("target/")), adam,
                   meta["step"], meta["episode"])


def run_training(cfg: RunConfig, outdir: str | Path | None = None,
                 progress: Callable[[dict], None] | None = None,
                 env: SoccerCourt | None = None) -> TrainerState:
    """Roll out, store, learn, sync, repeat until ``total_steps`` env steps.

    With an ``outdir``, writes ``metrics.log`` (one JSON record per line) and
    ``checkpoints/step-N.ckpt``. ``env`` replaces the default world built
    from ``cfg.env`` (it must use the same config).
    """
    cfg.validate()
    tc = cfg.trainer
    env = env or SoccerCourt(cfg.env)
    encoder = ObservationEncoder(cfg.env, cfg.perception.max_slots)
    topo = build_topology(cfg)
    online = init_params(topo, init_seed(cfg.seed), np.dtype(cfg.network.dtype))
    target = online.copy()
    state = TrainerState(online, target, AdamState.for_params(online, tc.adam_beta1,
                                                               tc.adam_beta2, tc.adam_eps))
    buffer = ReplayBuffer(tc.buffer_capacity)
    rng = np.random.Generator(np.random.PCG64([cfg.seed, 1]))
    action_rng = np.random.Generator(np.random.PCG64([cfg.seed, 2]))
    T = cfg.env.episode_length
    n_episodes = tc.total_steps // T

    metrics_fh = None
    ckpt_dir = None
    if outdir is not None:
        outdir = Path(outdir)
        ckpt_dir = outdir / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(outdir / "metrics.log", "w")

    def emit(record: dict) -> None:
        state.metrics.append(record)
        if metrics_fh is not None:
            metrics_fh.write(json.dumps(record, sort_keys=True) + "\n")

    def save() -> None:
        if ckpt_dir is not None:
            (ckpt_dir / f"step-{state.step}.ckpt").write_bytes(state.checkpoint_bytes(tc))

    try:
        emit({"event": "start", "seed": cfg.seed, "episodes": n_episodes,
              "ablate": sorted(cfg.reward.ablate),
              "reward_composition": composition(cfg.reward)})
        for ep in range(n_episodes):
            eps = epsilon_at(state.step, tc)
            policy = QPolicy(state.online, eps)
            result = run_episode(env, encoder, policy, episode_seed(cfg.seed, ep), cfg.reward,
                                 cfg.perception.noise, action_rng)
            buffer.add(EpisodeRecord(result.observations, result.actions, result.rewards))
            state.step += T
            state.episode += 1
            loss = None
            if state.episode % tc.train_every_episodes == 0:
                loss = train_step(buffer, state.online, state.target, state.adam, tc, rng,
                                  lr_at(state.step, tc))
            sync_target(state.online, state.target, state.episode, tc.target_sync_episodes)
            record = {"event": "episode", "episode": state.episode, "step": state.step,
                      "epsilon": eps, "loss": loss,
                      "coverage": float(result.visibility.max(axis=1).mean()),
                      "reward": result.term_means}
            emit(record)
            if progress is not None and state.episode % tc.progress_every_episodes == 0:
                progress(record)
            if state.episode % tc.checkpoint_every_episodes == 0:
                save()
        if n_episodes % tc.checkpoint_every_episodes != 0 or n_episodes == 0:
            save()
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    return state
