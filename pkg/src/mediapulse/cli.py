"""mediapulse command line.

Exit codes: 0 success (including partial success with data), 1 operational
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import GROUP_CHOICES, ConfigError, RunConfig, build_config
from .ingest import FixtureError, RosterError, load_roster
from .lexicon import LexiconError
from .metrics import MetricsError
from .pipeline import build_report, crawl, load_matcher, scan
from .report import FORMATS, render
from .store import BucketMismatchError, Store, StoreError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

log = logging.getLogger("mediapulse")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--store", help="store directory (overrides $MEDIAPULSE_STORE and config)")
    common.add_argument("--roster", help="YAML roster of feed sources")
    common.add_argument("--lexicon", help="YAML lexicon of entities and aliases")
    common.add_argument("--window", help="campaign window FIRST:LAST, ISO dates")
    common.add_argument("--format", choices=FORMATS, help="output format")
    common.add_argument("--decimal", choices=("comma", "dot"), help="decimal separator for rendered numbers")
    common.add_argument("-v", "--verbose", action="count", default=0)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="mediapulse", description="Media visibility of political entities.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("crawl", parents=[common], help="poll feeds once and store linked articles")
    p.add_argument("--offline", help="fixture directory standing in for the network")
    p.add_argument("--summaries-only", action="store_true", default=None,
                   help="count feed titles and summaries instead of fetching pages")
    p.add_argument("--save-fixtures", help="record fetched bodies into a fixture directory")
    p.add_argument("--jobs", type=int, help="sources fetched concurrently (default 1)")
    p.add_argument("--per-host-delay", type=float, help="seconds between requests to one host")
    p.add_argument("--user-agent")

    sub.add_parser("scan", parents=[common], help="count lexicon mentions in stored articles")

    p = sub.add_parser("report", parents=[common], help="render share, change, seat and poll tables")
    p.add_argument("--group", choices=sorted(GROUP_CHOICES))
    p.add_argument("--from-shares", help="JSON share tables to report on instead of the store")
    p.add_argument("--election", help="YAML seats/poll fixture, or 'none'")
    p.add_argument("--count-reappearances", action="store_true", default=None,
                   help="count an article on every day it appeared in a feed")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    return parser


def _emit_summary(summary: dict, fmt: str) -> None:
    if fmt == "structured":
        print(json.dumps(summary, indent=2, sort_keys=True))
        return
    for key, value in summary.items():
        if isinstance(value, dict):
            for sub_key, items in value.items():
                for item in items:
                    print(f"{key}.{sub_key}: {item}")
        else:
            print(f"{key}: {value}")


def cmd_crawl(config: RunConfig) -> int:
    load_roster(config.roster_path)
    if config.offline_fixture_dir is not None and not config.offline_fixture_dir.is_dir():
        raise ConfigError(f"offline fixture directory {config.offline_fixture_dir} not found")
    with Store(config.store_path, config.bucket) as store:
        summary = crawl(config, store)
    _emit_summary(summary.as_dict(), config.output_format)
    if summary.feeds_ok == 0:
        log.error("no source could be polled")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_scan(config: RunConfig) -> int:
    lexicon, matcher = load_matcher(config)
    with Store(config.store_path, config.bucket) as store:
        summary = scan(store, lexicon, matcher)
    _emit_summary(summary.as_dict(), config.output_format)
    return EXIT_OK


def cmd_report(config: RunConfig) -> int:
    if config.from_shares is not None:
        report = build_report(config)
    else:
        load_matcher(config)
        if not config.store_path.is_dir():
            raise StoreError(f"store {config.store_path} does not exist; run crawl and scan first")
        store = Store(config.store_path, config.bucket, writable=False)
        report = build_report(config, store)
    for warning in report.warnings:
        log.warning("%s", warning)
    text = render(report, config.output_format, config.decimal)
    if config.output is not None:
        config.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"crawl": cmd_crawl, "scan": cmd_scan, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "command", "verbose")}
    try:
        config = build_config(overrides, args.config)
        return COMMANDS[args.command](config)
    except (ConfigError, RosterError, LexiconError, FixtureError, BucketMismatchError, MetricsError) as exc:
        print(f"mediapulse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"mediapulse: error: {exc.filename}: file not found", file=sys.stderr)
        return EXIT_USAGE
    except (StoreError, OSError) as exc:
        print(f"mediapulse: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
