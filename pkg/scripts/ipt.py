"""Ground-coordinate estimation error with and without detector noise.

    python scripts/ipt.py --steps 1000
"""
import argparse

from camcover.config import NoiseConfig, WorldConfig
from camcover.evaluation import ipt_benchmark


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    world = WorldConfig()
    for label, noise in (("noise off", NoiseConfig()),
                         ("noise on", NoiseConfig(True, miss_probability=0.05, pixel_jitter_sigma=2.0))):
        print(f"-- {label}")
        print(ipt_benchmark(world, args.steps, noise, seed=args.seed).table())


if __name__ == "__main__":
    main()
