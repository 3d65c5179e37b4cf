"""Configuration dataclasses and YAML loading.

Defaults follow the soccer-court setup (10000 x 5000 court, 6 cameras,
22 targets, 640x480 frames, 90 degree view angle) and the reward / training
constants used for it. Everything is overridable from a YAML file or from
``section.key=value`` overrides on the command line.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class WorldConfig:
    court_half_x: float = 5000.0
    court_half_y: float = 2500.0
    n_targets: int = 22
    n_cameras: int = 6
    camera_height: float = 500.0
    camera_pitch_deg: float = -6.0
    frame_width: int = 640
    frame_height: int = 480
    base_hfov_deg: float = 90.0
    episode_length: int = 100
    target_speed: float = 100.0
    destination_timeout: int = 15
    # a box counts as "covering" its target above this frame-area fraction
    mu_min: float = 0.0005
    zoom_min: float = 0.5
    zoom_max: float = 2.0
    translation_step: float = 100.0
    rotation_step_deg: float = 10.0
    zoom_step: float = 0.1
    target_width: float = 60.0
    target_depth: float = 40.0
    target_height: float = 180.0

    def validate(self) -> None:
        positive = [
            "court_half_x", "court_half_y", "n_targets", "n_cameras",
            "camera_height", "frame_width", "frame_height", "base_hfov_deg",
            "episode_length", "zoom_min", "zoom_max", "target_width",
            "target_depth", "target_height",
        ]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"env.{name} must be positive, got {getattr(self, name)!r}")
        for name in ["target_speed", "destination_timeout", "translation_step",
                     "rotation_step_deg", "zoom_step", "mu_min"]:
            if getattr(self, name) < 0:
                raise ConfigError(f"env.{name} must be non-negative")
        if not self.base_hfov_deg < 180:
            raise ConfigError("env.base_hfov_deg must be below 180")
        if not self.zoom_min <= 1.0 <= self.zoom_max:
            raise ConfigError("zoom bounds must bracket 1.0")
        if not -90.0 <= self.camera_pitch_deg <= 90.0:
            raise ConfigError("env.camera_pitch_deg must lie in [-90, 90]")

    @property
    def perimeter(self) -> float:
        return 4.0 * (self.court_half_x + self.court_half_y)

    @property
    def frame_area(self) -> float:
        return float(self.frame_width * self.frame_height)

    @property
    def pitch(self) -> float:
        return math.radians(self.camera_pitch_deg)

    @property
    def base_hfov(self) -> float:
        return math.radians(self.base_hfov_deg)


@dataclass
class NoiseConfig:
    enabled: bool = False
    miss_probability: float = 0.0
    pixel_jitter_sigma: float = 0.0

    def validate(self) -> None:
        if not 0.0 <= self.miss_probability <= 1.0:
            raise ConfigError("noise.miss_probability must lie in [0, 1]")
        if self.pixel_jitter_sigma < 0:
            raise ConfigError("noise.pixel_jitter_sigma must be non-negative")


@dataclass
class PerceptionConfig:
    max_slots: int | None = None  # None -> n_targets
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def validate(self) -> None:
        if self.max_slots is not None and self.max_slots < 0:
            raise ConfigError("perception.max_slots must be non-negative")
        self.noise.validate()


ABLATIONS = ("team", "vis", "dir", "box", "pos", "all-individual")


@dataclass
class RewardConfig:
    w_team: float = 0.4
    lambda_vis: float = 0.8
    lambda_dir: float = 0.2
    lambda_pos: float = 0.2
    alpha_max: float = math.pi / 4
    mu_max: float = 0.2
    d_max: float = 5000.0
    ablate: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if not 0.0 <= self.w_team <= 1.0:
            raise ConfigError("reward.w_team must lie in [0, 1]")
        if min(self.lambda_vis, self.lambda_dir, self.lambda_pos) < 0:
            raise ConfigError("reward lambdas must be non-negative")
        if not 0.0 < self.alpha_max <= math.pi:
            raise ConfigError("reward.alpha_max must lie in (0, pi]")
        if self.d_max <= 0:
            raise ConfigError("reward.d_max must be positive")
        unknown = set(self.ablate) - set(ABLATIONS)
        if unknown:
            raise ConfigError(f"unknown ablation(s) {sorted(unknown)}; choose from {ABLATIONS}")


@dataclass
class NetworkConfig:
    enc1: int = 64
    enc2: int = 64
    trunk: int = 128
    hidden: int = 128
    dtype: str = "float64"

    def validate(self) -> None:
        for name in ("enc1", "enc2", "trunk", "hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"network.{name} must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("network.dtype must be float32 or float64")


@dataclass
class TrainerConfig:
    gamma: float = 0.99
    lr: float = 0.0005
    lr_end: float | None = None   # linear decay target; None keeps lr constant
    lr_decay_steps: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 10.0
    batch_episodes: int = 32
    buffer_capacity: int = 2000
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_anneal_steps: int = 50000
    target_sync_episodes: int = 100
    train_every_episodes: int = 1
    total_steps: int = 500000
    checkpoint_every_episodes: int = 500
    progress_every_episodes: int = 10

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("trainer.gamma must lie in [0, 1)")
        if self.eps_end > self.eps_start:
            raise ConfigError("trainer.eps_end must not exceed eps_start")
        if not (0.0 <= self.eps_end and self.eps_start <= 1.0):
            raise ConfigError("epsilon values must lie in [0, 1]")
        if self.lr < 0:
            raise ConfigError("trainer.lr must be non-negative")
        if self.lr_end is not None and self.lr_end < 0:
            raise ConfigError("trainer.lr_end must be non-negative")
        if self.lr_decay_steps < 0:
            raise ConfigError("trainer.lr_decay_steps must be non-negative")
        for name in ("batch_episodes", "buffer_capacity", "target_sync_episodes",
                     "train_every_episodes", "checkpoint_every_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"trainer.{name} must be >= 1")
        if self.total_steps < 0 or self.eps_anneal_steps < 0:
            raise ConfigError("step counts must be non-negative")


@dataclass
class EvalConfig:
    n_runs: int = 100
    seed_offset: int = 1_000_000


@dataclass
class RunConfig:
    env: WorldConfig = field(default_factory=WorldConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0
    outdir: str = "runs/default"

    def validate(self) -> "RunConfig":
        self.env.validate()
        self.perception.validate()
        self.reward.validate()
        self.network.validate()
        self.trainer.validate()
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.eval.n_runs < 1:
            raise ConfigError("eval.n_runs must be >= 1")
        return self

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _build(cls, data: dict[str, Any] | None, where: str):
    data = dict(data or {})
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data.pop(f.name)
        if f.default_factory is not dataclasses.MISSING:
            proto = f.default_factory()
            if dataclasses.is_dataclass(proto):
                value = _build(type(proto), value, f"{where}{f.name}.")
        kwargs[f.name] = value
    if data:
        raise ConfigError(f"unknown config key(s): {', '.join(where + k for k in data)}")
    return cls(**kwargs)


def config_from_dict(data: dict[str, Any] | None) -> RunConfig:
    return _build(RunConfig, data, "").validate()


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> RunConfig:
    """Read a YAML run config and apply ``dotted.key=value`` overrides.

    Precedence is overrides > file > dataclass defaults.
    """
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        loaded = yaml.safe_load(path.read_text())
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        data = loaded or {}
    for item in overrides or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a scalar")
        node[parts[-1]] = yaml.safe_load(raw)
    return config_from_dict(data)
