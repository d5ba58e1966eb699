"""Command line: ``trace-gen``, ``run``, ``preset`` and ``report``.

Exit status is 0 on success, 2 for configuration or input errors and 3 for
failures while running.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .metrics import LogParseError, aggregate, aggregate_file, emit, report_json
from .model import ModelError
from .presets import PRESETS, run_preset
from .sim.config import ConfigError, SimConfig, load_config, parse_config
from .sim.engine import dump_log, run
from .sim.traces import TRACE_KINDS, generate_trace

log = logging.getLogger("edgesched")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

CONFIG_KEYS = [f.name for f in dataclasses.fields(SimConfig) if f.name != "latency_table"]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value run configuration file")
    for key in CONFIG_KEYS:
        p.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE")


def _config_from(args) -> SimConfig:
    overrides = {k: getattr(args, k) for k in CONFIG_KEYS if getattr(args, k) is not None}
    if args.config:
        return load_config(args.config, **overrides)
    return parse_config("", **overrides)


def cmd_trace_gen(args) -> int:
    text = generate_trace(args.kind, args.frames, args.seed, args.out, dominant=args.dominant)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config_from(args)
    if not cfg.trace:
        raise ConfigError("a trace is required (--trace or trace= in the config file)")
    records = run(cfg)
    if args.log:
        dump_log(records, args.log)
    report = aggregate(records)
    if args.out:
        emit(report, args.out, args.format)
    else:
        sys.stdout.write(report_json(report))
    return EXIT_OK


def cmd_preset(args) -> int:
    cfg = _config_from(args)
    reports = run_preset(args.name, cfg, trace_dir=args.trace_dir, jobs=args.jobs)
    for path in emit(reports, args.out, args.format):
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_report(args) -> int:
    reports = [aggregate_file(p, Path(p).stem) for p in args.logs]
    emit(reports, args.out, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgesched", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace-gen", help="write a synthetic trace")
    p.add_argument("--kind", choices=TRACE_KINDS, required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dominant", type=float, default=0.7)
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.set_defaults(func=cmd_trace_gen)

    p = sub.add_parser("run", help="simulate one configuration")
    _add_config_flags(p)
    p.add_argument("--log", help="write the JSON-lines run log here")
    p.add_argument("--out", help="directory for report files (JSON to stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json", "both"), default="json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run one of the experiment batches")
    p.add_argument("name", choices=PRESETS)
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    p.add_argument("--trace-dir", default="traces")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("report", help="aggregate saved run logs")
    p.add_argument("logs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ModelError, LogParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
