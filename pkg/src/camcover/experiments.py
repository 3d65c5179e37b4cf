"""Reusable experiment drivers shared by scripts/ and the acceptance suite."""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path

from .config import RunConfig
from .evaluation import EvalReport, evaluate
from .rollout import FixedCameraPolicy, QPolicy
from .toy import MatchReport, ToyCourt, greedy_match_rate, toy_config
from .trainer import run_training

TOY_EVAL_SEEDS = range(1_000_000, 1_000_050)


@dataclass
class GainResult:
    seed: int
    greedy: EvalReport
    baseline: EvalReport
    train_seconds: float

    @property
    def gain_pp(self) -> float:
        return 100.0 * (self.greedy.mean - self.baseline.mean)


def with_seed(cfg: RunConfig, seed: int, outdir: str | Path | None = None) -> RunConfig:
    return replace(cfg, seed=seed, outdir=str(outdir) if outdir is not None else cfg.outdir)


def learning_gain(cfg: RunConfig, seed: int, outdir: str | Path | None = None,
                  progress=None, baseline: EvalReport | None = None) -> GainResult:
    """Train one seed, then compare greedy coverage with the fixed cameras on the eval seeds."""
    run = with_seed(cfg, seed, outdir)
    start = time.perf_counter()
    state = run_training(run, outdir, progress=progress)
    elapsed = time.perf_counter() - start
    greedy = evaluate(QPolicy(state.online, 0.0), run, label=f"greedy seed {seed}")
    if baseline is None:
        baseline = evaluate(FixedCameraPolicy(), run, label="fixed-camera baseline")
    return GainResult(seed, greedy, baseline, elapsed)


@dataclass
class ToyResult:
    seed: int
    match: MatchReport
    train_seconds: float
    eval_seconds: float


def toy_optimality(seed: int = 0, outdir: str | Path | None = None, progress=None,
                   eval_seeds=TOY_EVAL_SEEDS) -> ToyResult:
    """Train on the toy court and score the greedy policy against the exact planner."""
    cfg = toy_config(seed)
    start = time.perf_counter()
    state = run_training(cfg, outdir, progress=progress, env=ToyCourt(cfg.env))
    mid = time.perf_counter()
    match = greedy_match_rate(state.online, cfg, eval_seeds)
    return ToyResult(seed, match, mid - start, time.perf_counter() - mid)
