"""Command-line entry point: train, eval, gradcheck, ipt-bench."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ABLATIONS, ConfigError, NoiseConfig, RunConfig, load_config
from .evaluation import evaluate, ipt_benchmark
from .gradcheck import run_gradcheck
from .neuralnet import CheckpointError, TopologyMismatch, load_params
from .rollout import FixedCameraPolicy, QPolicy
from .trainer import build_topology, run_training

log = logging.getLogger("camcover")

GRADCHECK_TOLERANCE = 1e-4
IPT_BOUND = 50.0


def _fail(msg: str, code: int = 2) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _config(args) -> RunConfig:
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "outdir", None) is not None:
        overrides.append(f"outdir={args.outdir}")
    if getattr(args, "total_steps", None) is not None:
        overrides.append(f"trainer.total_steps={args.total_steps}")
    if getattr(args, "ablate", None):
        overrides.append(f"reward.ablate=[{', '.join(args.ablate)}]")
    return load_config(args.config, overrides)


def cmd_train(args) -> int:
    try:
        cfg = _config(args)
        outdir = Path(cfg.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "config.echo").write_text(cfg.dump())
    except ConfigError as e:
        return _fail(str(e))
    except OSError as e:
        return _fail(f"cannot write to {e.filename or cfg.outdir}: {e.strerror}")

    def progress(rec: dict) -> None:
        loss = "-" if rec["loss"] is None else f"{rec['loss']:.4f}"
        print(f"episode {rec['episode']:6d}  step {rec['step']:8d}  eps {rec['epsilon']:.3f}  "
              f"loss {loss}  coverage {100 * rec['coverage']:.1f}%", flush=True)

    try:
        state = run_training(cfg, outdir, progress=None if args.quiet else progress)
    except OSError as e:
        return _fail(f"I/O failure under {outdir}: {e}")
    print(f"finished {state.episode} episodes ({state.step} steps); artifacts in {outdir}")
    return 0


def cmd_eval(args) -> int:
    try:
        cfg = _config(args)
    except ConfigError as e:
        return _fail(str(e))
    if args.baseline:
        policy, label = FixedCameraPolicy(), "fixed-camera baseline"
    else:
        if args.checkpoint is None:
            return _fail("eval needs a checkpoint path or --baseline")
        path = Path(args.checkpoint)
        if not path.is_file():
            return _fail(f"checkpoint not found: {path}")
        try:
            params = load_params(path, build_topology(cfg))
        except TopologyMismatch as e:
            return _fail(str(e), code=3)
        except CheckpointError as e:
            return _fail(f"{path}: {e}", code=3)
        dtype = np.dtype(cfg.network.dtype)
        params.arrays = {k: v.astype(dtype) for k, v in params.arrays.items()}
        policy, label = QPolicy(params, epsilon=0.0), f"greedy {path.name}"
    report = evaluate(policy, cfg, n_runs=args.n_runs, label=label)
    print(report.table())
    out = Path(args.outdir or cfg.outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json() + "\n")
        (out / "report.txt").write_text(report.table() + "\n")
    except OSError as e:
        return _fail(f"cannot write report under {out}: {e.strerror}")
    return 0


def _corrupt_gradients(grads: dict) -> dict:
    bad = dict(grads)
    key = sorted(bad)[0]
    bad[key] = bad[key] * 1.5 + 1e-3
    return bad


def cmd_gradcheck(args) -> int:
    if args.trials < 0:
        return _fail("trials must be >= 0")
    if args.trials == 0:
        print("warning: 0 trials requested; nothing was checked", file=sys.stderr)
        print("gradcheck: PASS (vacuous)")
        return 0
    corrupt = _corrupt_gradients if args.inject_fault else None
    results = run_gradcheck(args.seed, args.trials, corrupt=corrupt)
    worst = max(results, key=lambda r: r.max_rel_error)
    for k, r in enumerate(results):
        if args.verbose:
            print(f"trial {k:3d}  max rel error {r.max_rel_error:.3e}  ({r.worst_param})")
    ok = worst.max_rel_error < GRADCHECK_TOLERANCE
    print(f"gradcheck: {'PASS' if ok else 'FAIL'}  trials {len(results)}  "
          f"max rel error {worst.max_rel_error:.3e} at {worst.worst_param}  "
          f"(tolerance {GRADCHECK_TOLERANCE:g})")
    return 0 if ok else 1


def cmd_ipt_bench(args) -> int:
    try:
        cfg = _config(args)
    except ConfigError as e:
        return _fail(str(e))
    if args.steps < 1:
        return _fail("steps must be >= 1")
    noise = (NoiseConfig(enabled=True, miss_probability=args.miss, pixel_jitter_sigma=args.jitter)
             if args.noise else NoiseConfig(enabled=False))
    report = ipt_benchmark(cfg.env, args.steps, noise, seed=cfg.seed)
    print(report.table())
    if args.noise or report.n_unclipped == 0:
        return 0
    ok = report.unclipped_mean < IPT_BOUND
    print(f"unclipped mean < {IPT_BOUND:g}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", help="YAML run config (defaults apply when omitted)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key, e.g. --set env.n_targets=8 (repeatable)")
    p.add_argument("--seed", type=int, help="run seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camcover",
                                     description="Multi-camera target coverage with deep Q-learning.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the shared Q-network")
    p.add_argument("config", nargs="?", help="YAML run config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--outdir", help="output directory (config key outdir)")
    p.add_argument("--total-steps", type=int, help="environment steps to train for")
    p.add_argument("--ablate", action="append", choices=ABLATIONS,
                   help="drop a reward term (repeatable)")
    p.add_argument("--quiet", action="store_true", help="no progress lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or the fixed-camera baseline")
    p.add_argument("checkpoint", nargs="?", help="checkpoint file from training")
    _add_config_args(p)
    p.add_argument("--n-runs", type=int, help="evaluation episodes (default from config)")
    p.add_argument("--baseline", action="store_true",
                   help="evaluate fixed cameras instead of a checkpoint")
    p.add_argument("--outdir", help="where report.json and report.txt go")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the network backward pass")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ipt-bench", help="ground-coordinate estimation error benchmark")
    _add_config_args(p)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--noise", action="store_true", help="enable the detector noise model")
    p.add_argument("--miss", type=float, default=0.05, help="miss probability with --noise")
    p.add_argument("--jitter", type=float, default=2.0, help="pixel jitter sigma with --noise")
    p.set_defaults(func=cmd_ipt_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "eval" and args.n_runs is not None and args.n_runs < 1:
        return _fail("--n-runs must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
