"""Command line entry point: ``rombayes <stage> --config cfg.yaml --output dir``."""

import argparse
from dataclasses import replace
import logging
import sys

from .config import load_config
from .errors import ConfigError, StageError
from .pipeline import run_pipeline

COMMANDS = {
    "simulate": "simulate",
    "pod": "pod",
    "rom": "rom",
    "sensitivity": "sensitivity",
    "identify": "identify",
    "validate": "validate",
    "report": "report",
    "run": "report",
}

log = logging.getLogger("rombayes")


def build_parser():
    parser = argparse.ArgumentParser(prog="rombayes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, stage in COMMANDS.items():
        help_text = "run every stage" if name == "run" else f"run the pipeline up to '{stage}'"
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML configuration file")
        p.add_argument("--output", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="override every random seed")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.output:
            cfg = replace(cfg, output_dir=args.output)
        report = run_pipeline(cfg, until=COMMANDS[args.command])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for path in exc.artifacts:
            print(f"  kept {path}", file=sys.stderr)
        return 1
    for key, value in sorted(report.summary.items()):
        if key != "data":
            print(f"{key}: {value:.6g}" if isinstance(value, float) else f"{key}: {value}")
    for name in report.files:
        print(f"wrote {name}")
    return 0
