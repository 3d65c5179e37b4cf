"""Train on the single-camera toy court and score greedy steps against the exact planner.

    python scripts/toy_mdp.py --seed 0
"""
import argparse

from camcover.experiments import toy_optimality


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default=None)
    args = ap.parse_args()

    def progress(rec):
        loss = "-" if rec["loss"] is None else f"{rec['loss']:.5f}"
        print(f"episode {rec['episode']:6d}  loss {loss}  reward {rec['reward']['total']:.3f}",
              flush=True)

    r = toy_optimality(args.seed, args.outdir, progress)
    print(f"optimal-action match {100 * r.match.rate:.1f}% over {r.match.steps} steps "
          f"(train {r.train_seconds:.0f} s, eval {r.eval_seconds:.0f} s)")


if __name__ == "__main__":
    main()
