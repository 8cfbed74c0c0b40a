"""Generation followed by two ground-conditioned atom transits, with and without modulation.

Writes fig1_solid.csv and fig1_dashed.csv and prints the values at the
interval boundaries.

    python scripts/fig1_trajectories.py [--out DIR]
"""
import argparse
from pathlib import Path

import numpy as np

from dceprobe.config import ExperimentConfig, write_output
from dceprobe.scenarios import run_fig1


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("fig1-out"))
    ap.add_argument("--samples", type=int, default=51, help="rows per interval")
    args = ap.parse_args()
    cfg = ExperimentConfig(fig1_samples=args.samples, out_dir=str(args.out))
    res = run_fig1(cfg)
    for name, table in (("solid", res.solid), ("dashed", res.dashed)):
        write_output(table, args.out / f"fig1_{name}", cfg)
        rows = np.array(table.rows)
        t = rows[:, 0]
        print(f"{name}:")
        for b in res.interval_bounds:
            i = int(np.flatnonzero(np.isclose(t, b))[-1])
            print("  t={:.0f} mcs  p_g={:.4f}  <n>={:.4f}  Var x={:.4f}  Var p={:.4f}  Var X={:.4f}".format(*rows[i]))
    print(f"max norm error {res.max_norm_error:.1e}, max purity error {res.max_purity_error:.1e}")


if __name__ == "__main__":
    main()
