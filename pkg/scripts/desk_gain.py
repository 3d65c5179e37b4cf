"""Train the desk-scale world on several seeds and compare against fixed cameras.

    python scripts/desk_gain.py --seeds 0 1 2 --outdir runs/desk
"""
import argparse
import json
from pathlib import Path

from camcover.config import load_config
from camcover.evaluation import evaluate
from camcover.experiments import learning_gain
from camcover.rollout import FixedCameraPolicy

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "desk.yaml"))
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--outdir", default="runs/desk")
    ap.add_argument("--min-gain", type=float, default=5.0, help="percentage points")
    args = ap.parse_args()

    cfg = load_config(args.config, args.set)
    baseline = evaluate(FixedCameraPolicy(), cfg, label="fixed-camera baseline")
    print(f"baseline coverage {100 * baseline.mean:.2f} +- {100 * baseline.std:.2f}%", flush=True)
    rows = []
    for seed in args.seeds:
        r = learning_gain(cfg, seed, Path(args.outdir) / f"seed{seed}", baseline=baseline)
        rows.append({"seed": seed, "greedy_mean": r.greedy.mean, "greedy_std": r.greedy.std,
                     "gain_pp": r.gain_pp, "train_seconds": r.train_seconds})
        print(f"seed {seed}: greedy {100 * r.greedy.mean:.2f} +- {100 * r.greedy.std:.2f}%  "
              f"gain {r.gain_pp:+.2f} pp  ({r.train_seconds / 60:.1f} min)", flush=True)
    wins = sum(row["gain_pp"] >= args.min_gain for row in rows)
    print(f"{wins}/{len(rows)} seeds gain at least {args.min_gain:g} pp")
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gain.json").write_text(json.dumps(
        {"baseline_mean": baseline.mean, "baseline_std": baseline.std, "seeds": rows}, indent=2))


if __name__ == "__main__":
    main()
