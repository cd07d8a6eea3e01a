"""Command-line entry point: run, validate, list-profiles."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..capacity import CapacityDomainError
from ..channel import ChannelDomainError
from ..hardware import HardwareDomainError
from ..profiles import list_profiles
from ..sensing import SensingError
from ..tradeoff import TradeoffError
from .config import EXPERIMENT_IDS, ConfigError, dump_config, load_config
from .runner import NumericalFailure, run_all

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("thzisac")


def _parser():
    p = argparse.ArgumentParser(prog="thzisac", description="THz inter-satellite ISAC performance-limit sweeps")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the experiments listed in a config file")
    r.add_argument("config", help="YAML config file (an empty file runs everything with defaults)")
    r.add_argument("-o", "--output", help="output directory (overrides output.directory)")
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("-j", "--jobs", type=int, default=1, help="worker processes for grid points")
    r.add_argument("--only", help="comma-separated subset of experiment ids")

    v = sub.add_parser("validate", help="check a config file and print the resolved settings")
    v.add_argument("config")

    lp = sub.add_parser("list-profiles", help="print the built-in hardware profiles")
    lp.add_argument("--json", action="store_true")
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = cfg.with_seed(args.seed)
    only = None
    if args.only:
        only = [s.strip() for s in args.only.split(",") if s.strip()]
        bad = [s for s in only if s not in EXPERIMENT_IDS]
        if bad:
            raise ConfigError(f"--only: unknown experiment(s) {', '.join(bad)}")
        missing = [s for s in only if s not in cfg.experiments]
        if missing:
            raise ConfigError(f"--only: not enabled in the config: {', '.join(missing)}")
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = Path(args.output or cfg.output["directory"])
    for note in cfg.extrapolations:
        log.warning("extrapolation: %s", note)
    results = run_all(cfg, out, jobs=args.jobs, only=only)
    for e, r in results.items():
        print(f"{e}: {r.n_rows} rows, {r.metadata['wall_clock_s']:.2f} s")
    print(f"config hash {cfg.config_hash()}, seed {cfg.seed}; output in {out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"# {args.config}: OK (config hash {cfg.config_hash()})")
    for note in cfg.extrapolations:
        print(f"# extrapolation: {note}")
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def _cmd_list_profiles(args) -> int:
    profs = list_profiles()
    if args.json:
        print(json.dumps(profs, indent=2))
        return EXIT_OK
    hdr = f"{'name':<18} {'gamma_eff':>9} {'components':>10} {'EVM':>6} {'jitter(fs)':>10} {'ENOB':>5} " \
          f"{'linewidth(kHz)':>14} {'sigma_phi2':>10} {'B_sys(GHz)':>10}"
    print(hdr)
    for p in profs:
        print(f"{p['name']:<18} {p['gamma_asserted']:>9.4g} {p['gamma_eff_components']:>10.4g} {p['evm_pa']:>6.4g} "
              f"{p['jitter_rms_s'] * 1e15:>10.4g} {p['enob_bits']:>5.3g} {p['linewidth_hz'] / 1e3:>14.4g} "
              f"{p['phase_variance_rad2']:>10.4g} {p['system_bandwidth_hz'] / 1e9:>10.4g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"run": _cmd_run, "validate": _cmd_validate, "list-profiles": _cmd_list_profiles}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, SensingError, TradeoffError, HardwareDomainError, ChannelDomainError,
            CapacityDomainError, FloatingPointError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
