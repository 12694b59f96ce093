"""Corpus walking, per-file analysis fan-out and output writing."""

from __future__ import annotations

import csv
import functools
import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Final, Iterable, Optional, Sequence

from . import __version__
from .complexity import ComplexityBlock, Rank, analyze_file_complexity
from .join import JoinResult, join_cases
from .proficiency import (
    CompetencyLevel,
    ConstructRegistry,
    ProficiencyOccurrence,
    classify_constructs,
    default_registry,
    filter_by_level,
)
from .report import (
    PHI_DEFINITION,
    ProjectOverviewRow,
    category_matrix,
    matrix_to_dict,
    project_overview,
    render_tables,
    top_classes,
)
from .syntax import GRAMMAR_LABEL, ParseError, directory_of, enumerate_blocks, parse_source

log = logging.getLogger(__name__)

OCCURRENCE_COLUMNS: Final = ("project", "directory", "file", "class", "start_line", "end_line", "level")
BLOCK_COLUMNS: Final = (
    "project", "directory", "file", "kind", "name", "cc", "rank", "line_start", "line_end",
)
CASE_COLUMNS: Final = (
    "project", "directory", "file", "class", "start_line", "end_line", "level",
    "block_kind", "block_name", "cc", "rank", "line_start", "line_end",
    "level_category", "risk_category",
)
FORMATS: Final = frozenset({"csv", "json", "table"})
TOP_N: Final = 5


class MissingRoot(FileNotFoundError):
    """A configured project root does not exist."""


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    roots: Sequence[tuple[str, Path]]
    output_dir: Path
    include_glob: str = "**/*.py"
    exclude_globs: Sequence[str] = ()
    keep_levels: frozenset[CompetencyLevel] = frozenset({CompetencyLevel.C1, CompetencyLevel.C2})
    keep_ranks: frozenset[Rank] = frozenset({Rank.A, Rank.F})
    registry_path: Optional[Path] = None
    formats: frozenset[str] = FORMATS
    jobs: int = 1

    def validate(self) -> None:
        if not self.roots:
            raise ConfigError("at least one project root is required")
        names = [name for name, _ in self.roots]
        if len(set(names)) != len(names):
            raise ConfigError("project names must be unique")
        if any(not name or "/" in name for name in names):
            raise ConfigError("project names must be non-empty and contain no '/'")
        unknown = set(self.formats) - FORMATS
        if unknown:
            raise ConfigError(f"unknown output format(s): {', '.join(sorted(unknown))}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not all(isinstance(x, CompetencyLevel) for x in self.keep_levels):
            raise ConfigError("keep_levels must be competency levels")
        if not all(isinstance(x, Rank) for x in self.keep_ranks):
            raise ConfigError("keep_ranks must be ranks")

    def echo(self) -> dict:
        return {
            "roots": [[name, str(path)] for name, path in self.roots],
            "include_glob": self.include_glob,
            "exclude_globs": list(self.exclude_globs),
            "keep_levels": sorted(x.value for x in self.keep_levels),
            "keep_ranks": sorted(x.value for x in self.keep_ranks),
            "registry_path": str(self.registry_path) if self.registry_path else None,
            "output_dir": str(self.output_dir),
            "formats": sorted(self.formats),
            "jobs": self.jobs,
        }


@dataclass(frozen=True)
class CorpusFile:
    project: str
    directory: str
    path: str  # posix, relative to the project root
    absolute: Path


@dataclass(frozen=True)
class FileResult:
    project: str
    path: str
    error: Optional[str] = None
    occurrences: tuple[ProficiencyOccurrence, ...] = ()
    blocks: tuple[ComplexityBlock, ...] = ()

    @property
    def parsed(self) -> bool:
        return self.error is None


@dataclass
class RunManifest:
    tool_version: str
    grammar: str
    registry_hash: str
    files_attempted: int
    files_parsed: int
    files_skipped: int
    timestamp: str
    config: dict
    skipped: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "grammar": self.grammar,
            "registry_hash": self.registry_hash,
            "files": {
                "attempted": self.files_attempted,
                "parsed": self.files_parsed,
                "skipped": self.files_skipped,
            },
            "skipped_files": self.skipped,
            "timestamp": self.timestamp,
            "config": self.config,
        }


@dataclass
class RunOutput:
    manifest: RunManifest
    occurrences: list[ProficiencyOccurrence]
    blocks: list[ComplexityBlock]
    join: JoinResult
    summary: dict


# ---------------------------------------------------------------------------
# Walking
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def glob_regex(pattern: str) -> re.Pattern:
    """Compile a ``/``-separated glob where ``**`` spans directories."""
    out = []
    i = 0
    while i < len(pattern):
        if pattern.startswith("**/", i):
            out.append("(?:.*/)?")
            i += 3
        elif pattern.startswith("/**", i) and i + 3 == len(pattern):
            out.append("(?:/.*)?")
            i += 3
        elif pattern.startswith("**", i):
            out.append(".*")
            i += 2
        elif pattern[i] == "*":
            out.append("[^/]*")
            i += 1
        elif pattern[i] == "?":
            out.append("[^/]")
            i += 1
        else:
            out.append(re.escape(pattern[i]))
            i += 1
    return re.compile("".join(out))


def glob_match(path: str, pattern: str) -> bool:
    return glob_regex(pattern).fullmatch(path) is not None


def walk_corpus(config: RunConfig) -> list[CorpusFile]:
    """Files under every root matching the include glob and no exclude glob.

    Ordered by (project, relative path); symlinks are not followed.
    """
    files = []
    for project, root in config.roots:
        root = Path(root)
        if not root.is_dir():
            raise MissingRoot(f"project root does not exist or is not a directory: {root}")
        for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
            dirnames[:] = [d for d in dirnames if not os.path.islink(os.path.join(dirpath, d))]
            for name in filenames:
                absolute = Path(dirpath, name)
                if absolute.is_symlink():
                    continue
                rel = absolute.relative_to(root).as_posix()
                if not glob_match(rel, config.include_glob):
                    continue
                if any(glob_match(rel, g) for g in config.exclude_globs):
                    continue
                files.append(CorpusFile(project, directory_of(rel), rel, absolute))
    files.sort(key=lambda f: (f.project, f.path))
    return files


# ---------------------------------------------------------------------------
# Per-file work
# ---------------------------------------------------------------------------


def analyze_file(item: CorpusFile, registry: ConstructRegistry) -> FileResult:
    try:
        data = item.absolute.read_bytes()
        tree = parse_source(data, item.path)
    except ParseError as exc:
        return FileResult(item.project, item.path, error=f"line {exc.line}: {exc.message}")
    except OSError as exc:
        return FileResult(item.project, item.path, error=f"unreadable: {exc.strerror or exc}")
    blocks = enumerate_blocks(tree)
    occurrences = classify_constructs(tree, registry, item.project)
    scored = analyze_file_complexity(tree, item.project, blocks)
    return FileResult(item.project, item.path, None, tuple(occurrences), tuple(scored))


def analyze_files(
    files: Sequence[CorpusFile], registry: ConstructRegistry, jobs: int = 1
) -> list[FileResult]:
    """Analyse files in order; results come back in input order for any ``jobs``."""
    work = functools.partial(analyze_file, registry=registry)
    if jobs <= 1 or len(files) <= 1:
        return [work(f) for f in files]
    chunksize = max(1, len(files) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, files, chunksize=chunksize))


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def run_analysis(config: RunConfig, now: Optional[datetime] = None) -> RunOutput:
    """Run the whole pipeline and write every requested output into ``output_dir``."""
    config.validate()
    registry = (
        ConstructRegistry.from_file(config.registry_path) if config.registry_path else default_registry()
    )
    files = walk_corpus(config)
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(output_dir, os.W_OK):
        raise PermissionError(f"output directory is not writable: {output_dir}")

    log.info("analysing %d files with %d worker(s)", len(files), config.jobs)
    results = analyze_files(files, registry, config.jobs)

    all_occs = [o for r in results for o in r.occurrences]
    all_blocks = [b for r in results for b in r.blocks]
    occs = filter_by_level(all_occs, config.keep_levels)
    parsed = {(r.project, r.path) for r in results if r.parsed}
    joined = join_cases(occs, all_blocks, parsed_files=parsed, keep_ranks=config.keep_ranks)

    attempted: dict[str, int] = {name: 0 for name, _ in config.roots}
    for f in files:
        attempted[f.project] += 1
    summary = build_summary(attempted, all_occs, all_blocks, joined, len(occs))

    skipped = [{"project": r.project, "file": r.path, "reason": r.error} for r in results if not r.parsed]
    for item in skipped:
        log.warning("skipped %s:%s (%s)", item["project"], item["file"], item["reason"])
    manifest = RunManifest(
        tool_version=__version__,
        grammar=GRAMMAR_LABEL,
        registry_hash=registry.digest(),
        files_attempted=len(files),
        files_parsed=len(files) - len(skipped),
        files_skipped=len(skipped),
        timestamp=(now or datetime.now(timezone.utc)).strftime("%Y-%m-%dT%H:%M:%SZ"),
        config=config.echo(),
        skipped=skipped,
    )

    kept_blocks = [b for b in all_blocks if b.rank in config.keep_ranks]
    if "csv" in config.formats:
        write_csv(output_dir / "occurrences.csv", OCCURRENCE_COLUMNS, map(occurrence_row, occs))
        write_csv(output_dir / "blocks.csv", BLOCK_COLUMNS, map(block_row, kept_blocks))
        write_csv(output_dir / "cases.csv", CASE_COLUMNS, map(case_row, joined.cases))
    if "json" in config.formats:
        write_json(output_dir / "summary.json", summary)
    if "table" in config.formats:
        (output_dir / "report.txt").write_text(summary_table(summary, joined), encoding="utf-8", newline="\n")
    write_json(output_dir / "manifest.json", manifest.to_dict())
    return RunOutput(manifest, occs, all_blocks, joined, summary)


def build_summary(
    attempted: dict[str, int],
    all_occs: list[ProficiencyOccurrence],
    all_blocks: list[ComplexityBlock],
    joined: JoinResult,
    occurrence_total: int,
) -> dict:
    overview = project_overview(attempted, all_occs, all_blocks)
    pooled = category_matrix(joined.cases)
    per_project = {
        name: matrix_to_dict(category_matrix(c for c in joined.cases if c.occurrence.project == name))
        for name in sorted(attempted)
    }
    return {
        "overview": [
            {
                "project": r.project,
                "files": r.file_count,
                "C1": r.c1_count,
                "C2": r.c2_count,
                "A": r.rank_a_count,
                "F": r.rank_f_count,
            }
            for r in overview
        ],
        "matrix": matrix_to_dict(pooled),
        "matrix_per_project": per_project,
        "averaging": "pooled: fractions are computed over all joined cases of all projects together",
        "association": PHI_DEFINITION,
        "top_classes": {
            risk: [
                {"class": r.construct_class, "level": r.level_category, "rank": r.risk_category, "cases": r.case_count}
                for r in top_classes(joined.cases, TOP_N, risk)
            ]
            for risk in ("Risky", "Safe")
        },
        "join": {
            "occurrences": occurrence_total,
            "cases": len(joined.cases),
            "discarded_module_level": joined.discarded_module_level,
            "discarded_by_rank": joined.discarded_by_rank,
            "discarded_by_level": joined.discarded_by_level,
        },
    }


def summary_table(summary: dict, joined: JoinResult) -> str:
    overview = [
        ProjectOverviewRow(r["project"], r["files"], r["C1"], r["C2"], r["A"], r["F"]) for r in summary["overview"]
    ]
    pooled = category_matrix(joined.cases)
    projects = [r.project for r in overview]
    per_project = {p: category_matrix(c for c in joined.cases if c.occurrence.project == p) for p in projects}
    return render_tables(
        overview,
        pooled,
        per_project,
        top_classes(joined.cases, TOP_N, "Risky"),
        top_classes(joined.cases, TOP_N, "Safe"),
    )


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def occurrence_row(o: ProficiencyOccurrence) -> tuple:
    return (o.project, o.directory, o.file, o.construct_class, o.start_line, o.end_line, o.level.value)


def block_row(b: ComplexityBlock) -> tuple:
    return (b.project, b.directory, b.file, b.kind, b.qualified_name, b.score, b.rank.value, b.start_line, b.end_line)


def case_row(c) -> tuple:
    o, b = c.occurrence, c.block
    return (
        o.project, o.directory, o.file, o.construct_class, o.start_line, o.end_line, o.level.value,
        b.kind, b.qualified_name, b.score, b.rank.value, b.start_line, b.end_line,
        c.level_category, c.risk_category,
    )


def write_csv(path: Path, header: Sequence[str], rows: Iterable[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")


def read_occurrences(path: Path) -> list[ProficiencyOccurrence]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            ProficiencyOccurrence(
                r["project"], r["directory"], r["file"], r["class"],
                int(r["start_line"]), int(r["end_line"]), CompetencyLevel(r["level"]),
            )
            for r in csv.DictReader(fh)
        ]


def read_blocks(path: Path) -> list[ComplexityBlock]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            ComplexityBlock(
                r["project"], r["directory"], r["file"], r["kind"], r["name"],
                int(r["cc"]), Rank(r["rank"]), int(r["line_start"]), int(r["line_end"]),
            )
            for r in csv.DictReader(fh)
        ]
