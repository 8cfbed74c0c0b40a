"""Sampled click statistics versus the exact-probability pipeline at several atom counts.

    python scripts/mc_clicks.py [--atoms 1000 10000 100000] [--seed 2015]
"""
import argparse

from dceprobe.config import ExperimentConfig
from dceprobe.scenarios import run_mc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--atoms", type=int, nargs="+", default=[1000, 10000, 100000])
    ap.add_argument("--seed", type=int, default=2015)
    args = ap.parse_args()
    print(f"{'atoms':>8s} {'moment':>6s} {'sampled':>10s} {'std err':>9s} {'exact':>9s} {'z':>6s}")
    for atoms in args.atoms:
        e = run_mc(ExperimentConfig(mc_atoms=atoms, seed=args.seed)).estimates
        for key in ("n", "X", "X2"):
            print(f"{atoms:8d} {key:>6s} {e[key + '_sampled']:10.4f} {e[key + '_std_err']:9.4f} "
                  f"{e[key + '_exact_pipeline']:9.4f} {e[key + '_z']:6.2f}")


if __name__ == "__main__":
    main()
