"""Command line entry point: ``python -m sss_kv {bench,check,scenario,sweep}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Mapping, Sequence
from typing import Any

import colorlog

from .bench import oracle_agreement, preset_configs, run_benchmark, run_sweep, write_report, write_samples
from .checker import check_trace
from .config import BenchConfig, apply_overrides, load_config
from .const import PROTOCOL_SSS, PROTOCOLS
from .exceptions import CheckerError, ConfigurationError, LivelockError, SimulationStalledError
from .scenarios import SCENARIO_ALIASES, SCENARIOS, run_scenario
from .trace import read_trace

_LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(log_color)s%(asctime)s %(levelname)-8s %(name)s: %(message)s"


def setup_logging(logger_cfg: Mapping[str, Any] | None = None, verbose: bool = False) -> None:
    """Colored console logging; per-logger levels come from the ``logger`` section."""
    logger_cfg = logger_cfg or {}
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    default = "debug" if verbose else logger_cfg.get("default", "info")
    root.setLevel(default.upper())
    for name, level in logger_cfg.get("logs", {}).items():
        logging.getLogger(name).setLevel(level.upper())


def _config(args: argparse.Namespace) -> BenchConfig:
    cfg = load_config(args.config)
    return apply_overrides(
        cfg,
        seed=args.seed,
        protocol=args.protocol,
        latency=args.latency,
        drop_rate=args.drop_rate,
    )


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _config(args)
    setup_logging(cfg.logger, args.verbose)
    if args.presets:
        return _bench_presets(cfg, check=not args.no_check)
    report = run_benchmark(cfg, check=not args.no_check, trace_path=args.trace)
    if args.out:
        write_report(report, args.out)
    if args.samples:
        write_samples(report.samples, args.samples)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if report.check is not None and not report.check.consistent:
        return 1
    return 0


def _bench_presets(cfg: BenchConfig, *, check: bool) -> int:
    reports = []
    for preset in preset_configs(cfg):
        _LOGGER.info(
            "Preset %d keys, %d%% read-only",
            preset.placement.num_keys,
            preset.workload.read_only_pct,
        )
        reports.append(run_benchmark(preset, check=check))
    print(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True))
    return 0 if all(r.check is None or r.check.consistent for r in reports) else 1


def cmd_check(args: argparse.Namespace) -> int:
    setup_logging(verbose=args.verbose)
    try:
        report = check_trace(read_trace(args.trace_file))
    except CheckerError as err:
        _LOGGER.error("Cannot check %s: %s", args.trace_file, err)
        return 2
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0 if report.consistent else 1


def cmd_scenario(args: argparse.Namespace) -> int:
    setup_logging(verbose=args.verbose)
    result = run_scenario(args.name)
    for milestone in result.milestones:
        print(milestone)
    if result.diff:
        print("\n".join(result.diff))
    print(json.dumps(result.check.to_dict(), indent=2, sort_keys=True))
    if args.trace:
        result.cluster.trace.write(args.trace)
    return 0 if result.ok else 1


def cmd_sweep(args: argparse.Namespace) -> int:
    setup_logging(verbose=args.verbose)
    if args.oracle:
        sweep = oracle_agreement(args.runs, base_seed=args.seed, protocol=args.protocol)
    else:
        sweep = run_sweep(args.runs, base_seed=args.seed, duration=args.duration, protocol=args.protocol)
    print(json.dumps(sweep.to_dict(), indent=2, sort_keys=True))
    return 0 if sweep.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sss_kv", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run one benchmark")
    bench.add_argument("--config", help="YAML configuration file")
    bench.add_argument("--seed", type=int)
    bench.add_argument("--protocol", choices=PROTOCOLS)
    bench.add_argument("--latency", type=float, help="fixed hop latency in units")
    bench.add_argument("--drop-rate", type=float)
    bench.add_argument("--out", help="JSON metrics report")
    bench.add_argument("--samples", help="CSV latency samples")
    bench.add_argument("--trace", help="NDJSON trace file")
    bench.add_argument("--no-check", action="store_true")
    bench.add_argument("--presets", action="store_true", help="run the key-space by read-only-share grid")
    bench.set_defaults(func=cmd_bench)

    check = sub.add_parser("check", help="check a recorded trace")
    check.add_argument("trace_file")
    check.set_defaults(func=cmd_check)

    scenario = sub.add_parser("scenario", help="run a directed scenario")
    scenario.add_argument("name", choices=sorted([*SCENARIOS, *SCENARIO_ALIASES]))
    scenario.add_argument("--trace", help="NDJSON trace file")
    scenario.set_defaults(func=cmd_scenario)

    sweep = sub.add_parser("sweep", help="randomized consistency sweep")
    sweep.add_argument("--runs", type=int, default=1000)
    sweep.add_argument("--seed", type=int, default=0, help="first seed")
    sweep.add_argument("--duration", type=int, default=200, help="scripts per run")
    sweep.add_argument("--protocol", choices=PROTOCOLS, default=PROTOCOL_SSS)
    sweep.add_argument("--oracle", action="store_true", help="small runs, graph vs brute-force")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as err:
        _LOGGER.error("Configuration error: %s", err)
        return 2
    except (LivelockError, SimulationStalledError) as err:
        _LOGGER.error("%s: %s", err, err.dump)
        return 3


if __name__ == "__main__":
    sys.exit(main())
