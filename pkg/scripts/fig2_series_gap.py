"""Exact detection probabilities against their second-order expansions.

    python scripts/fig2_series_gap.py [--out DIR]
"""
import argparse
from pathlib import Path

import numpy as np

from dceprobe.config import ExperimentConfig, write_output
from dceprobe.scenarios import exact_probabilities, generated_state, run_fig2, series_probabilities


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("fig2-out"))
    args = ap.parse_args()
    cfg = ExperimentConfig(out_dir=str(args.out))
    state = generated_state(cfg)
    print(f"wrote {write_output(run_fig2(cfg, state), args.out / 'fig2', cfg)}")
    ladder = np.array([0.08, 0.04, 0.02, 0.01])
    ex = exact_probabilities(state, ladder, cfg.theta_x)
    se = series_probabilities(state, ladder, cfg.theta_x)
    names = ("P_g (1 atom)", "P~_g (1 atom)", "P~_gg (2 atoms)")
    print(f"{'tau':>6s}" + "".join(f"{n:>18s}" for n in names))
    for i, tau in enumerate(ladder):
        print(f"{tau:6.2f}" + "".join(f"{abs(ex[k][i] - se[k][i]):18.3e}" for k in range(3)))


if __name__ == "__main__":
    main()
