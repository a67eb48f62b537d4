"""Command-line interface: run sweeps, evaluate costs, list presets."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .config import ConfigError, SystemConfig
from .harness import (load_or_preset, run_experiment, write_cost_csv, write_csv)
from .presets import PRESETS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfmimo",
        description="Cell-free massive MIMO downlink simulator "
                    "(multi-antenna users, downlink pilots)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep and write CSV")
    run.add_argument("--preset", help="preset name (see list-presets)")
    run.add_argument("--config", help="JSON experiment spec (alternative to --preset)")
    run.add_argument("--seed", type=int, default=None, help="master seed override")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--workers", type=int, default=1, help="parallel processes")
    run.add_argument("--drops", type=int, default=None, help="network drops override")
    run.add_argument("--blocks", type=int, default=None,
                     help="channel blocks per drop override")

    cost = sub.add_parser("cost", help="evaluate complexity and fronthaul loads")
    cost.add_argument("--config", required=True,
                      help="JSON file with SystemConfig fields (or an "
                           "experiment spec containing a 'config' object)")
    cost.add_argument("--out", default=None, help="CSV path (default: stdout)")

    sub.add_parser("list-presets", help="print available presets")
    return parser


def cmd_run(args) -> int:
    spec = load_or_preset(args.preset, args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.drops is not None:
        overrides["n_drops"] = args.drops
    if args.blocks is not None:
        overrides["n_blocks"] = args.blocks
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    table = run_experiment(spec, workers=args.workers)
    write_csv(table, args.out)
    print(f"wrote {len(table.rows)} rows to {args.out} (seed={spec.seed})")
    return 0


def cmd_cost(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    cfg_doc = doc.get("config", doc)
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = set(cfg_doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = SystemConfig(**cfg_doc)
    write_cost_csv(cfg, args.out if args.out else sys.stdout)
    return 0


def cmd_list_presets() -> int:
    width = max(len(name) for name in PRESETS)
    for name, spec in PRESETS.items():
        grid = ",".join(str(v) for v in spec.param_grid)
        print(f"{name:<{width}}  sweep {spec.param_name} in [{grid}]  "
              f"methods={'/'.join(spec.methods)}  bounds={'/'.join(spec.bounds)}  "
              f"{spec.n_drops} drops x {spec.n_blocks} blocks")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "cost":
            return cmd_cost(args)
        if args.command == "list-presets":
            return cmd_list_presets()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
