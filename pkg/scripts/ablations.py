"""Train the desk-scale world with reward terms removed and compare greedy coverage.

    python scripts/ablations.py --ablations none team all-individual --total-steps 100000
"""
import argparse
from pathlib import Path

from camcover.config import ABLATIONS, load_config
from camcover.experiments import learning_gain

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "desk.yaml"))
    ap.add_argument("--ablations", nargs="+", default=["none", "team", "all-individual"],
                    choices=("none",) + ABLATIONS)
    ap.add_argument("--total-steps", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="runs/ablations")
    args = ap.parse_args()

    baseline = None
    for name in args.ablations:
        overrides = [] if name == "none" else [f"reward.ablate=[{name}]"]
        if args.total_steps is not None:
            overrides.append(f"trainer.total_steps={args.total_steps}")
        cfg = load_config(args.config, overrides)
        r = learning_gain(cfg, args.seed, Path(args.outdir) / name, baseline=baseline)
        baseline = r.baseline
        print(f"{name:15s} greedy {100 * r.greedy.mean:.2f} +- {100 * r.greedy.std:.2f}%  "
              f"baseline {100 * r.baseline.mean:.2f}%", flush=True)


if __name__ == "__main__":
    main()
