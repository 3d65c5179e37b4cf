"""Acceptance suite: one PASS/FAIL line per criterion, printed at its stated tolerance.

The desk-scale and toy experiments train from scratch, so this module takes
tens of minutes on one CPU core. Deselect it with ``-m "not acceptance"``.
"""
import hashlib
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from camcover.cli import main as cli_main
from camcover.config import NoiseConfig, WorldConfig, load_config
from camcover.evaluation import evaluate, ipt_benchmark
from camcover.experiments import learning_gain, toy_optimality
from camcover.geometry import (CameraModel, CameraPose, inverse_project_ground_many,
                               project_points)
from camcover.gradcheck import run_gradcheck
from camcover.rollout import FixedCameraPolicy
from camcover.simenv import SoccerCourt

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parent.parent
DESK = ROOT / "configs" / "desk.yaml"
DESK_SEEDS = (0, 1, 2)


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    return emit


def digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_1_geometry_round_trip(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, pairs = 0.0, 0
    while pairs < 10_000:
        pose = CameraPose(0.0, *rng.uniform([-5000, -2500], [5000, 2500]), rng.uniform(100, 1000),
                          rng.uniform(-math.pi, math.pi), math.radians(rng.uniform(-60, -2)),
                          rng.uniform(0.5, 2.0))
        cam = CameraModel.from_pose(pose)
        g = rng.uniform([-5000, -2500], [5000, 2500], size=(64, 2))
        uv, zc = project_points(cam, np.column_stack([g, np.zeros(len(g))]))
        keep = zc > 0
        back, ok = inverse_project_ground_many(cam, uv[keep])
        assert ok.all()
        worst = max(worst, float(np.abs(back - g[keep]).max(initial=0.0)))
        pairs += int(keep.sum())
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 5.0
    report(1, ok, f"{pairs} pairs, max error {worst:.2e} (< 1e-6), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_2_ipt(report):
    world = WorldConfig()
    start = time.perf_counter()
    rep = ipt_benchmark(world, n_steps=1000, noise=NoiseConfig(enabled=False))
    # exact pixels: project each target's ground point and map it back
    env = SoccerCourt(world)
    exact = 0.0
    for seed in range(20):
        s = env.reset(seed)
        pts = np.column_stack([s.target_positions(), np.zeros(world.n_targets)])
        for pose in s.cameras:
            cam = env.camera_model(pose)
            uv, zc = project_points(cam, pts)
            keep = zc > 0
            back, ok = inverse_project_ground_many(cam, uv[keep])
            exact = max(exact, float(np.abs(back[ok] - pts[keep, :2][ok]).max(initial=0.0)))
    elapsed = time.perf_counter() - start
    ok = rep.unclipped_mean < 50.0 and exact < 1e-6 and elapsed < 60.0
    report(2, ok, f"unclipped mean {rep.unclipped_mean:.2f} +- {rep.unclipped_std:.2f} (< 50) "
                  f"over {rep.n_unclipped} detections, exact-pixel error {exact:.2e} (< 1e-6), "
                  f"{elapsed:.1f} s (< 60 s)")
    assert ok


def test_3_gradcheck(report):
    start = time.perf_counter()
    results = run_gradcheck(seed=0, trials=20)
    elapsed = time.perf_counter() - start
    worst = max(r.max_rel_error for r in results)
    ok = len(results) >= 20 and worst < 1e-4 and elapsed < 60.0
    report(3, ok, f"{len(results)} instances, max relative error {worst:.2e} (< 1e-4), "
                  f"{elapsed:.1f} s (< 60 s)")
    assert ok


def test_4_reward_suite(report):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(ROOT / "tests" / "test_reward.py")],
                          capture_output=True, text=True, cwd=ROOT)
    elapsed = time.perf_counter() - start
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and elapsed < 10.0
    report(4, ok, f"reward property suite: {summary}; {elapsed:.1f} s wall incl. startup (< 10 s)")
    assert ok


def test_5_toy_optimality(report, tmp_path):
    start = time.perf_counter()
    r = toy_optimality(seed=0, outdir=tmp_path / "toy")
    elapsed = time.perf_counter() - start
    ok = r.match.rate >= 0.95 and len(r.match.per_seed) == 50 and elapsed < 600.0
    report(5, ok, f"greedy matches the exact optimum on {100 * r.match.rate:.1f}% of "
                  f"{r.match.steps} steps over {len(r.match.per_seed)} seeds (>= 95%), "
                  f"{elapsed:.0f} s (< 600 s)")
    assert ok


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    cfg = load_config(DESK)
    root = tmp_path_factory.mktemp("desk")
    baseline = evaluate(FixedCameraPolicy(), cfg, label="fixed-camera baseline")
    start = time.perf_counter()
    results = [learning_gain(cfg, s, root / f"seed{s}", baseline=baseline) for s in DESK_SEEDS]
    return cfg, root, baseline, results, time.perf_counter() - start


def test_6_desk_gain(report, desk_runs):
    cfg, _, baseline, results, elapsed = desk_runs
    wins = sum(r.gain_pp >= 5.0 for r in results)
    ok = wins >= 2
    per_seed = ", ".join(f"seed {r.seed} {100 * r.greedy.mean:.1f}% ({r.gain_pp:+.1f} pp)"
                         for r in results)
    report(6, ok, f"baseline {100 * baseline.mean:.1f} +- {100 * baseline.std:.1f}% over "
                  f"{baseline.n_runs} episodes; {per_seed}; {wins}/3 seeds gain >= 5 pp "
                  f"(need 2); {cfg.trainer.total_steps} steps per seed, "
                  f"{elapsed / 60:.1f} min total (target < 45 min)")
    assert ok


def test_7_ablations(report, tmp_path):
    logged = {}
    for name in ("team", "all-individual"):
        out = tmp_path / name
        code = cli_main(["train", str(DESK), "--ablate", name, "--total-steps", "3000",
                         "--outdir", str(out), "--quiet"])
        lines = (out / "metrics.log").read_text().splitlines() if code == 0 else []
        start = json.loads(lines[0]) if lines else {}
        episodes = sum(json.loads(l)["event"] == "episode" for l in lines)
        logged[name] = (code, start.get("reward_composition"), episodes)
    team_ok = (logged["team"][0] == 0 and logged["team"][1]["team"] == 0.0
               and logged["team"][1]["box"] == 1.0 and logged["team"][2] == 30)
    ind_ok = (logged["all-individual"][0] == 0 and logged["all-individual"][1]["team"] == 1.0
              and all(logged["all-individual"][1][k] == 0.0 for k in ("box", "vis", "dir", "pos"))
              and logged["all-individual"][2] == 30)
    ok = team_ok and ind_ok
    report(7, ok, f"--ablate team composition {logged['team'][1]}; "
                  f"--ablate all-individual composition {logged['all-individual'][1]}; "
                  f"both runs completed 30 episodes")
    assert ok


def test_8_determinism(report, desk_runs, tmp_path):
    cfg, root, _, _, _ = desk_runs
    learning_gain(cfg, DESK_SEEDS[0], tmp_path / "rerun")
    first, second = root / f"seed{DESK_SEEDS[0]}", tmp_path / "rerun"
    files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    same = [digest(first / f) == digest(second / f) for f in files]
    extra = {p.relative_to(second) for p in second.rglob("*") if p.is_file()} - set(files)
    ok = len(files) > 1 and all(same) and not extra
    report(8, ok, f"seed {DESK_SEEDS[0]} retrained: {sum(same)}/{len(files)} files "
                  f"byte-identical (checkpoints and metrics.log)")
    assert ok
