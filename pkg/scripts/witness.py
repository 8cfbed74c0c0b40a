"""Quadrature-variance witness for the generated field and a thermal state of equal <n>.

    python scripts/witness.py
"""
from dceprobe.config import ExperimentConfig
from dceprobe.fock import mean_n, thermal_state
from dceprobe.scenarios import generated_state, run_witness


def main():
    cfg = ExperimentConfig()
    dce = generated_state(cfg)
    for name, state in (("generated", dce), ("thermal", thermal_state(mean_n(dce), cfg.fock_dim))):
        for pipeline in ("direct", "via-estimators"):
            w = run_witness(cfg, state, pipeline)
            print(f"{name:10s} {pipeline:15s} min Var Q = {w.min_variance:.4f} at theta = {w.theta_at_min:.3f}"
                  f"  squeezed: {w.squeezed}")


if __name__ == "__main__":
    main()
