"""``crowdbp`` command line.

    crowdbp run --config FILE [--set key=value ...] [--out DIR]
    crowdbp presets list
    crowdbp presets show NAME

Exit status: 0 on success, 1 on a configuration error, 2 when an
experiment check fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, ExperimentConfig, format_value, load_config
from .experiments import run_experiment
from .output import emit_csv, write_summary

log = logging.getLogger("crowdbp")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


def run(cfg: ExperimentConfig, out_dir=None):
    out = Path(out_dir or cfg.output_path)
    result = run_experiment(cfg)
    h = cfg.config_hash()
    for name, table in result.tables.items():
        path = emit_csv(table, out / f"{name}.csv", h, cfg.master_seed)
        log.info("wrote %s (%d rows)", path, len(table))
    notes = [f"experiment={cfg.experiment} config_hash={h} seed={cfg.master_seed}"] + result.notes
    write_summary(out / "summary.txt", result.checks, notes)
    (out / "config.txt").write_text(cfg.to_text())
    return result


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.set or ())
        if args.out:
            cfg = cfg.replace(output_path=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for c in result.checks:
        print(c.line())
    return EXIT_OK if result.passed else EXIT_CHECK


def _cmd_presets(args) -> int:
    if args.action == "list":
        for name, values in PRESETS.items():
            print(f"{name}: " + ", ".join(f"{k}={format_value(v)}" for k, v in values.items()))
        return EXIT_OK
    if args.name not in PRESETS:
        print(f"unknown preset {args.name!r}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"preset = {args.name}")
    for k, v in PRESETS[args.name].items():
        print(f"# {k} = {format_value(v)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdbp", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("--config", required=True, help="key = value config file")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    p_run.add_argument("--out", help="output directory (overrides output_path)")
    p_run.set_defaults(func=_cmd_run)

    p_pre = sub.add_parser("presets", help="list or show built-in presets")
    p_pre.add_argument("action", choices=("list", "show"))
    p_pre.add_argument("name", nargs="?")
    p_pre.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "action", None) == "show" and not args.name:
        parser.error("presets show needs a preset name")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
