"""Command line entry point: ``siolab run|plot|validate|list-experiments``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import DESCRIPTIONS, run
from .report import PLOT_KINDS, PlotError, load_report, write_artifacts, write_plots

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="siolab", description="Boundary singular integral experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", type=Path)
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config leaf (TOML literal)")
    r.add_argument("--output-dir", type=Path, help="override output_dir")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config", type=Path)
    v.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    pl = sub.add_parser("plot", help="regenerate SVG plots from a report")
    pl.add_argument("report", type=Path, help="report.json or its directory")
    pl.add_argument("--kind", action="append", choices=PLOT_KINDS, help="plot kind (repeatable; default: all available)")
    pl.add_argument("--output-dir", type=Path)
    sub.add_parser("list-experiments", help="list experiment names")
    return p


def _summary_lines(report) -> list[str]:
    lines = []
    for rule in report.summary:
        status = "PASS" if rule.passed else "FAIL"
        bound = "" if rule.threshold is None else f" (threshold {rule.threshold:.3g})"
        lines.append(f"[{status}] criterion {rule.criterion}: {rule.rule}: {rule.measured:.6g}{bound}")
    return lines


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-experiments":
            for name, text in DESCRIPTIONS.items():
                print(f"{name:24s} {text}")
            return EXIT_OK
        if args.command == "plot":
            report = load_report(args.report)
            outdir = args.output_dir or (args.report if args.report.is_dir() else args.report.parent)
            outdir.mkdir(parents=True, exist_ok=True)
            for path in write_plots(report, outdir, args.kind):
                print(path)
            return EXIT_OK
        cfg = load_config(args.config, args.overrides)
        if args.command == "validate":
            print(json.dumps({"experiment": cfg.experiment, "config_sha256": cfg.content_hash()}))
            return EXIT_OK
        report = run(cfg)
        outdir = args.output_dir or cfg.output_dir
        write_artifacts(report, outdir)
        for line in _summary_lines(report):
            print(line)
        print(f"artifacts: {outdir}")
        return EXIT_OK if report.passed else EXIT_FAIL
    except (ConfigError, PlotError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"siolab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
