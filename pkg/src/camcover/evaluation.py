"""Coverage evaluation over many runs, plus the inverse-projection benchmark."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import NoiseConfig, RewardConfig, RunConfig, WorldConfig
from .perception import ObservationEncoder, detect, estimate_coordinates
from .rollout import run_episode
from .simenv import ALL_ACTIONS, SoccerCourt


def coverage_rate(visibility_history) -> float:
    """Fraction of (target, step) pairs covered by at least one camera.

    ``visibility_history`` has shape (T, n_cameras, n_targets).
    """
    v = np.asarray(visibility_history)
    if v.ndim != 3 or v.shape[0] == 0 or v.shape[2] == 0:
        raise ValueError(f"need a non-empty (T, n, m) history, got shape {v.shape}")
    T, _, m = v.shape
    per_target = v.max(axis=1).sum(axis=0) / T
    return float(per_target.sum() / m)


@dataclass
class EvalReport:
    mean: float
    std: float
    coverages: list[float]
    n_runs: int
    fingerprint: str
    label: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def table(self) -> str:
        rows = [("policy", self.label or "-"), ("runs", str(self.n_runs)),
                ("coverage mean", f"{100 * self.mean:.2f}%"),
                ("coverage std", f"{100 * self.std:.2f}%"),
                ("config", self.fingerprint)]
        rows += [(k, str(v)) for k, v in self.extra.items()]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def config_fingerprint(cfg: RunConfig | WorldConfig) -> str:
    d = asdict(cfg)
    d.pop("outdir", None)
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def evaluation_seeds(n_runs: int, offset: int) -> list[int]:
    return [offset + k for k in range(n_runs)]


def evaluate(policy, cfg: RunConfig, n_runs: int | None = None,
             seeds: list[int] | None = None, label: str = "") -> EvalReport:
    """Roll ``policy`` for full episodes on distinct seeds and aggregate coverage.

    Q-network policies should be built with epsilon = 0. The policy's
    parameters are only read.
    """
    n_runs = cfg.eval.n_runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = evaluation_seeds(n_runs, cfg.eval.seed_offset) if seeds is None else list(seeds)[:n_runs]
    env = SoccerCourt(cfg.env)
    encoder = ObservationEncoder(cfg.env, cfg.perception.max_slots)
    coverages = []
    for s in seeds:
        action_rng = np.random.Generator(np.random.PCG64([s, 3]))
        result = run_episode(env, encoder, policy, s, cfg.reward, cfg.perception.noise, action_rng)
        coverages.append(coverage_rate(result.visibility))
    arr = np.array(coverages)
    return EvalReport(float(arr.mean()), float(arr.std()), coverages, len(coverages),
                      config_fingerprint(cfg), label)


@dataclass
class IPTReport:
    mean_error: float
    std_error: float
    n_detections: int
    match_rate: float
    unclipped_mean: float
    unclipped_std: float
    n_unclipped: int
    clipped_mean: float
    n_clipped: int

    def table(self) -> str:
        return "\n".join([
            f"detections        {self.n_detections}  (match rate {100 * self.match_rate:.1f}%)",
            f"all boxes         mean {self.mean_error:.2f}  std {self.std_error:.2f}",
            f"unclipped boxes   mean {self.unclipped_mean:.2f}  std {self.unclipped_std:.2f}  (n={self.n_unclipped})",
            f"clipped boxes     mean {self.clipped_mean:.2f}  (n={self.n_clipped})",
        ])


def ipt_benchmark(world: WorldConfig, n_steps: int = 1000, noise: NoiseConfig | None = None,
                  seed: int = 0) -> IPTReport:
    """Estimated vs true ground positions over randomly driven episodes.

    Cameras take uniformly random actions so that poses vary. Each detection
    is matched to its generating target by id. The match rate is the share
    of ground-truth boxes that yield a coordinate estimate.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    noise = noise or NoiseConfig()
    env = SoccerCourt(world)
    rng = np.random.Generator(np.random.PCG64([seed, 11]))
    noise_rng = np.random.Generator(np.random.PCG64([seed, 12]))
    errors, clipped_flags = [], []
    n_boxes = 0
    state = env.reset(seed)
    episode = 0
    for _ in range(n_steps):
        if env.done(state):
            episode += 1
            state = env.reset(seed + episode)
        truth = state.target_positions()
        for i, pose in enumerate(state.cameras):
            boxes = env.synthesize_bboxes(state, i)
            n_boxes += len(boxes)
            seen = detect(boxes, noise, noise_rng, world.frame_width, world.frame_height)
            for d in estimate_coordinates(seen, env.camera_model(pose)):
                t = truth[d.box.target_id]
                errors.append(float(np.hypot(d.estimated_coord.x - t[0], d.estimated_coord.y - t[1])))
                clipped_flags.append(d.box.truncated)
        actions = [ALL_ACTIONS[k] for k in rng.integers(0, len(ALL_ACTIONS), size=len(state.cameras))]
        state = env.step(state, actions)
    err = np.array(errors)
    clip = np.array(clipped_flags, dtype=bool)

    def stats(x):
        return (float(x.mean()), float(x.std())) if len(x) else (float("nan"), float("nan"))

    mean, std = stats(err)
    um, us = stats(err[~clip]) if len(err) else (float("nan"), float("nan"))
    cm, _ = stats(err[clip]) if len(err) else (float("nan"), float("nan"))
    return IPTReport(mean, std, len(err), len(err) / n_boxes if n_boxes else 0.0,
                     um, us, int((~clip).sum()), cm, int(clip.sum()))
