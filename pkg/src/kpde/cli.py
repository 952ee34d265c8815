"""Command line entry point ``kpde``.

Exit codes: 0 all requested checks pass, 1 a check failed, 2 the
configuration is invalid, 3 a runtime or numerical error occurred.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import CHECKS, PRESETS, ConfigError, config_from_dict, load_config

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

COMMANDS = {
    "solve-det": (("det",), "solve the mean (γ = 0) problem deterministically"),
    "solve-chaos": (("chaos",), "solve the propagator system for every ε"),
    "regularize": (("regularize",), "regularize the potential along the ε schedule"),
    "verify": (("verify",), "run verification checks"),
    "run": (("regularize", "det", "chaos", "verify"), "run every stage"),
}


def _parser():
    ap = argparse.ArgumentParser(prog="kpde", description="Stochastic parabolic equations with singular potentials.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named preset (expanded before the config)")
        p.add_argument("--seed", type=int, help="Monte Carlo seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, help="worker processes (default: KPDE_THREADS or 1)")
        if name == "verify":
            p.add_argument("checks", nargs="*", metavar="CHECK",
                           help=f"checks to run ({'|'.join(CHECKS)}); default: those in the config")
    return ap


def _load(args):
    if args.config is None and args.preset is None:
        raise ConfigError([("", "give --config PATH or --preset NAME")])
    if args.config is not None:
        cfg = load_config(args.config, preset=args.preset)
    else:
        cfg = config_from_dict({}, preset=args.preset)
    raw = cfg.model_dump(mode="json")
    if args.seed is not None:
        raw["verification"]["seed"] = args.seed
    if args.out is not None:
        raw["output"]["directory"] = args.out
    checks = getattr(args, "checks", None)
    if checks:
        bad = [c for c in checks if c not in CHECKS]
        if bad:
            raise ConfigError([("checks", f"unknown check(s) {', '.join(bad)}; choose from {', '.join(CHECKS)}")])
        raw["verification"]["checks"] = list(dict.fromkeys(checks))
    return config_from_dict(raw, source=args.config)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"kpde: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("kpde: configuration error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    from .experiment import run_experiment

    stages = COMMANDS[args.command][0]
    try:
        report = run_experiment(cfg, stages=stages, threads=args.threads)
    except (ValueError, OSError) as exc:
        print(f"kpde: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if report.error:
        print(f"kpde: error: {report.error}", file=sys.stderr)
    for name, verdict in report.verdicts.items():
        print(f"{name}: {verdict}")
    print(f"report: {cfg.output.directory}/report.json")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
