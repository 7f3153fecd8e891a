"""Command-line entry point: ``sptforge <experiment> --config FILE [--mode] [--seed] [--out]``."""

from __future__ import annotations

import argparse
import sys

from .config import MODES, ExperimentConfig
from .experiments import EXPERIMENTS, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sptforge", description="Ising-cluster QITE experiment driver")
    parser.add_argument("experiment", choices=EXPERIMENTS + ("verify",))
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--mode", choices=MODES, help="execution mode (default from config)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory (default from config)")
    parser.add_argument("--criteria", type=int, nargs="*", help="verify: run only these criterion numbers")
    return parser


def load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.mode:
        changes["mode"] = args.mode
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out:
        changes["out"] = args.out
    return config.replace(**changes) if changes else config


def verify(config: ExperimentConfig, numbers=None) -> int:
    from .acceptance import format_table, run_all

    if config.seed is None:
        print("verify refuses to run without a seed: set 'seed' in the config or pass --seed", file=sys.stderr)
        return 2
    results = run_all(config, numbers)
    print(format_table(results))
    failed = [r.number for r in results if not r.passed]
    print(f"\n{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    if args.experiment == "verify":
        return verify(config, args.criteria)
    result = run_experiment(args.experiment, config)
    for name in result.files:
        print(f"wrote {config.out}/{name}")
    for key, value in result.summary.items():
        if isinstance(value, (int, float, bool, str)):
            print(f"{key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
