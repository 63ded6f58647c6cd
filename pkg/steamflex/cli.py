"""Unified CLI with dispatch, size, sweep, and validate commands."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from steamflex.config import RunConfig, list_presets, load_run_config
from steamflex.runner import EXIT_ERROR, SWEEP_KINDS, run_dispatch, run_size, run_sweep, run_validate
from steamflex.shared.errors import SteamflexError
from steamflex.shared.log import eprint, set_verbose

USAGE = """usage: steamflex <dispatch|size|sweep|validate|presets> [args...]

subcommands:
  dispatch  optimal dispatch of one configuration over the scenario
  size      grid search + differential evolution over a search space
  sweep     cost-factor (sensitivity) or feed-water (preheat) sweep
  validate  load and lint the scenario inputs
  presets   list bundled scenario presets

examples:
  steamflex dispatch --config runs/no_dispatch.yaml --out out/no
  steamflex size --config runs/de_search.yaml --preset DE-2024 --jobs 8
  steamflex sweep --kind preheat --config runs/no_search.yaml
  steamflex validate --config runs/no_dispatch.yaml
"""

_DESCRIPTIONS = {
    "dispatch": "Solve the dispatch LP for the configuration in the 'system' section",
    "size": "Size the boiler, accumulator and battery by NPV over the 'search' section",
    "sweep": "Run a sensitivity or preheat sweep over the 'search' section",
    "validate": "Load the scenario inputs and report problems",
}


def parse_args(command: str, argv: List[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog=f"steamflex {command}", description=_DESCRIPTIONS[command])
    parser.add_argument(
        "--config",
        type=str,
        required=True,
        help="Path to the YAML run config.",
    )
    parser.add_argument(
        "--preset",
        type=str,
        default=None,
        help=f"Scenario preset to merge the config over ({', '.join(list_presets())}).",
    )
    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output directory (overrides 'out' in the config).",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Seed for the FCR acceptance mask and differential evolution.",
    )
    parser.add_argument(
        "--jobs",
        "-j",
        type=int,
        default=None,
        help="Worker processes for grid and sweep evaluation (default: all CPUs for size/sweep).",
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Enable verbose logging.",
    )
    if command == "sweep":
        parser.add_argument(
            "--kind",
            type=str,
            choices=list(SWEEP_KINDS),
            required=True,
            help="Sweep to run.",
        )
    return parser.parse_args(argv)


def _load(command: str, args: argparse.Namespace) -> RunConfig:
    overrides = {"seed": args.seed, "jobs": args.jobs}
    cfg = load_run_config(args.config, preset=args.preset, overrides=overrides)
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    # a lone dispatch stays single-threaded
    if command in ("size", "sweep") and args.jobs is None and "jobs" not in cfg.raw:
        cfg.jobs = os.cpu_count() or 1
    return cfg


_RUNNERS: Dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "dispatch": lambda cfg, args: run_dispatch(cfg),
    "size": lambda cfg, args: run_size(cfg),
    "sweep": lambda cfg, args: run_sweep(cfg, args.kind),
    "validate": lambda cfg, args: run_validate(cfg),
}


def _run_command(command: str, argv: List[str]) -> int:
    args = parse_args(command, argv)
    set_verbose(args.verbose)
    try:
        cfg = _load(command, args)
        return _RUNNERS[command](cfg, args)
    except (SteamflexError, OSError) as e:
        eprint(f"error: {e}")
        return EXIT_ERROR


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in {"-h", "--help", "help"}:
        print(USAGE)
        return 0
    if not argv:
        print(USAGE)
        return 2

    cmd = argv[0]
    rest = argv[1:]

    if cmd in _RUNNERS:
        return _run_command(cmd, rest)
    if cmd == "presets":
        for name in list_presets():
            print(name)
        return 0

    print(f"unknown command: {cmd}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
