"""Command-line front end.

    dceprobe {fig1,fig2,eq27,scan,mc} [--config PATH] [--out DIR] [--seed N]
             [--fock-dim N] [--format {csv,json}] [--quiet]

Exit codes: 0 success, 1 eq27 acceptance failure, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .clicks import write_click_record
from .config import ExperimentConfig, load_config, write_output
from .errors import ConfigError, DCEProbeError
from .scenarios import run_eq27, run_fig1, run_fig2, run_mc, run_scan

log = logging.getLogger("dceprobe")

EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat TOML configuration file")
    common.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides seed)")
    common.add_argument("--fock-dim", type=int, help="Fock truncation (overrides fock_dim)")
    common.add_argument("--format", choices=("csv", "json"), help="output format (overrides format)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    ap = argparse.ArgumentParser(prog="dceprobe", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("fig1", parents=[common], help="generation and two conditioned atom transits")
    sub.add_parser("fig2", parents=[common], help="exact vs second-order detection probabilities")
    sub.add_parser("eq27", parents=[common], help="moment readout after generation, with acceptance bands")
    sub.add_parser("scan", parents=[common], help="single tau scan with derivative readout")
    sub.add_parser("mc", parents=[common], help="Monte Carlo click statistics")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.fock_dim is not None:
        overrides["fock_dim"] = args.fock_dim
    if args.format is not None:
        overrides["format"] = args.format
    return cfg.replace(**overrides) if overrides else cfg


def _emit(msg, quiet):
    if not quiet:
        print(msg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out_dir)
    try:
        if args.command == "fig1":
            res = run_fig1(cfg)
            for name, table in (("fig1_solid", res.solid), ("fig1_dashed", res.dashed)):
                _emit(f"wrote {write_output(table, out / name, cfg)}", args.quiet)
            _emit(f"max norm error {res.max_norm_error:.2e}", args.quiet)
        elif args.command == "fig2":
            _emit(f"wrote {write_output(run_fig2(cfg), out / 'fig2', cfg)}", args.quiet)
        elif args.command == "eq27":
            summary = run_eq27(cfg)
            path = write_output(summary, out / "eq27", cfg)
            if not args.quiet:
                for key in ("mean_n", "mean_X", "mean_X2"):
                    target = {"mean_n": cfg.expect_n, "mean_X": cfg.expect_x, "mean_X2": cfg.expect_x2}[key]
                    print(f"{key:8s} = {summary[key]: .5f}   (expected {target} +/- {cfg.band})")
                print(f"wrote {path}")
            if not summary["passed"]:
                print("eq27: outside acceptance bands", file=sys.stderr)
                return EXIT_ACCEPTANCE
        elif args.command == "scan":
            table, est = run_scan(cfg)
            _emit(f"wrote {write_output(table, out / 'scan', cfg)}", args.quiet)
            _emit(f"wrote {write_output(est, out / 'scan_estimate', cfg)}", args.quiet)
        elif args.command == "mc":
            res = run_mc(cfg)
            out.mkdir(parents=True, exist_ok=True)
            for key, rec in res.records.items():
                _emit(f"wrote {write_click_record(rec, out / f'mc_clicks_{key}.csv')}", args.quiet)
            _emit(f"wrote {write_output(res.estimates, out / 'mc_estimates', cfg)}", args.quiet)
            if not args.quiet:
                for key in ("n", "X", "X2"):
                    e = res.estimates
                    print(f"{key:3s} sampled {e[key + '_sampled']: .4f} +/- {e[key + '_std_err']:.4f}"
                          f"   exact pipeline {e[key + '_exact_pipeline']: .4f}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DCEProbeError as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
