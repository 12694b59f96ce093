"""Command-line entry point: ``profrisk analyze --project NAME=PATH --out DIR``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .complexity import Rank
from .corpus import FORMATS, ConfigError, MissingRoot, RunConfig, run_analysis
from .proficiency import CompetencyLevel, RegistryError

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_USAGE = 2
JOBS_ENV = "PROFRISK_JOBS"


def _project(value: str) -> tuple[str, Path]:
    name, sep, path = value.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {value!r}")
    return name, Path(path)


def _csv_set(choices, label):
    def parse(value: str):
        items = [v.strip() for v in value.split(",") if v.strip()]
        try:
            return frozenset(choices(v.upper() if label != "format" else v.lower()) for v in items)
        except (ValueError, KeyError):
            raise argparse.ArgumentTypeError(f"invalid {label} list {value!r}") from None

    return parse


def _format(value: str) -> str:
    if value not in FORMATS:
        raise ValueError(value)
    return value


def _positive_int(value: str) -> int:
    try:
        jobs = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if jobs < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return jobs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="profrisk",
        description="Map proficient Python constructs onto cyclomatic-complexity risk ranks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="analyse local source checkouts")
    analyze.add_argument(
        "--project", action="append", type=_project, required=True, metavar="NAME=PATH",
        help="project name and root directory (repeatable)",
    )
    analyze.add_argument("--out", type=Path, required=True, metavar="DIR", help="output directory")
    analyze.add_argument(
        "--levels", type=_csv_set(CompetencyLevel, "level"),
        default=frozenset({CompetencyLevel.C1, CompetencyLevel.C2}), help="competency levels to keep (default C1,C2)",
    )
    analyze.add_argument(
        "--ranks", type=_csv_set(Rank, "rank"), default=frozenset({Rank.A, Rank.F}),
        help="complexity ranks to keep (default A,F)",
    )
    analyze.add_argument("--registry", type=Path, metavar="FILE", help="construct registry file")
    analyze.add_argument(
        "--format", type=_csv_set(_format, "format"), default=FORMATS, dest="formats",
        help="outputs to write: csv,json,table (default all)",
    )
    analyze.add_argument("--include", default="**/*.py", metavar="GLOB", help="file glob (default **/*.py)")
    analyze.add_argument("--exclude", action="append", default=[], metavar="GLOB", help="exclude glob (repeatable)")
    analyze.add_argument("--jobs", type=_positive_int, metavar="N", help=f"worker processes (env {JOBS_ENV})")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    jobs = args.jobs
    if jobs is None:
        env = os.environ.get(JOBS_ENV)
        if env:
            try:
                jobs = _positive_int(env)
            except argparse.ArgumentTypeError as exc:
                parser.error(f"{JOBS_ENV}: {exc}")
    config = RunConfig(
        roots=args.project,
        output_dir=args.out,
        include_glob=args.include,
        exclude_globs=tuple(args.exclude),
        keep_levels=args.levels,
        keep_ranks=args.ranks,
        registry_path=args.registry,
        formats=args.formats,
        jobs=jobs or 1,
    )
    try:
        config.validate()
    except ConfigError as exc:
        parser.error(str(exc))

    try:
        output = run_analysis(config)
    except (MissingRoot, RegistryError, OSError) as exc:
        print(f"profrisk: error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    if "table" in config.formats:
        sys.stdout.write((Path(config.output_dir) / "report.txt").read_text(encoding="utf-8"))
    m = output.manifest
    print(
        f"files: {m.files_attempted} attempted, {m.files_parsed} parsed, {m.files_skipped} skipped; "
        f"{len(output.join.cases)} joined cases -> {config.output_dir}",
        file=sys.stderr,
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
