"""Aggregates over joined cases: the category matrix, top classes, project overview."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Final, Iterable, Mapping, Optional

from .complexity import ComplexityBlock, Rank
from .join import JoinedCase
from .proficiency import CompetencyLevel, ProficiencyOccurrence

LEVEL_CATEGORIES: Final = ("Advance", "Mastery")
RISK_CATEGORIES: Final = ("Safe", "Risky")
CATEGORY_KEYS: Final = tuple((lvl, risk) for lvl in LEVEL_CATEGORIES for risk in RISK_CATEGORIES)

PHI_DEFINITION: Final = (
    "phi = (AS*MR - AR*MS) / sqrt((AS+AR)(MS+MR)(AS+MS)(AR+MR)); "
    "rows Advance/Mastery, columns Safe/Risky; 0 when any marginal is 0"
)


@dataclass(frozen=True)
class CategoryMatrix:
    counts: Mapping[tuple[str, str], int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def percentages(self) -> dict[tuple[str, str], float]:
        total = self.total
        return {k: (self.counts[k] / total if total else 0.0) for k in CATEGORY_KEYS}

    def count(self, level_category: str, risk_category: str) -> int:
        return self.counts[(level_category, risk_category)]

    def safe_share(self) -> float:
        pct = self.percentages
        return pct[("Advance", "Safe")] + pct[("Mastery", "Safe")]


@dataclass(frozen=True)
class ClassTableRow:
    construct_class: str
    level_category: str
    risk_category: str
    case_count: int


@dataclass(frozen=True)
class ProjectOverviewRow:
    project: str
    file_count: int
    c1_count: int
    c2_count: int
    rank_a_count: int
    rank_f_count: int


def category_matrix(cases: Iterable[JoinedCase]) -> CategoryMatrix:
    counts = dict.fromkeys(CATEGORY_KEYS, 0)
    for case in cases:
        counts[(case.level_category, case.risk_category)] += 1
    return CategoryMatrix(counts)


def association_score(matrix: CategoryMatrix) -> float:
    """Phi coefficient of the level-by-risk contingency table."""
    if matrix.total == 0:
        raise ValueError("association score is undefined for an empty matrix")
    a = matrix.count("Advance", "Safe")
    b = matrix.count("Advance", "Risky")
    c = matrix.count("Mastery", "Safe")
    d = matrix.count("Mastery", "Risky")
    marginals = (a + b) * (c + d) * (a + c) * (b + d)
    if marginals == 0:
        return 0.0
    return (a * d - b * c) / math.sqrt(marginals)


def top_classes(
    cases: Iterable[JoinedCase], n: Optional[int], risk: str
) -> list[ClassTableRow]:
    """Most frequent (class, level) pairs among cases of one risk category.

    Sorted by count descending, then class name; ``n=None`` keeps every row.
    """
    if n is not None and n < 1:
        raise ValueError("n must be >= 1")
    tally = Counter(
        (c.occurrence.construct_class, c.level_category) for c in cases if c.risk_category == risk
    )
    rows = [ClassTableRow(cls, lvl, risk, count) for (cls, lvl), count in tally.items()]
    rows.sort(key=lambda r: (-r.case_count, r.construct_class, r.level_category))
    return rows if n is None else rows[:n]


def project_overview(
    files: Mapping[str, int],
    occs: Iterable[ProficiencyOccurrence],
    blocks: Iterable[ComplexityBlock],
) -> list[ProjectOverviewRow]:
    """One row per project: attempted files, C1/C2 occurrences, rank A/F blocks."""
    c1: Counter[str] = Counter()
    c2: Counter[str] = Counter()
    for occ in occs:
        if occ.level is CompetencyLevel.C1:
            c1[occ.project] += 1
        elif occ.level is CompetencyLevel.C2:
            c2[occ.project] += 1
    rank_a: Counter[str] = Counter()
    rank_f: Counter[str] = Counter()
    for block in blocks:
        if block.rank is Rank.A:
            rank_a[block.project] += 1
        elif block.rank is Rank.F:
            rank_f[block.project] += 1
    projects = set(files) | set(c1) | set(c2) | set(rank_a) | set(rank_f)
    return [
        ProjectOverviewRow(p, files.get(p, 0), c1[p], c2[p], rank_a[p], rank_f[p])
        for p in sorted(projects)
    ]


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def matrix_to_dict(matrix: CategoryMatrix) -> dict:
    pct = matrix.percentages
    out = {
        "total": matrix.total,
        "counts": {f"{lvl}-{risk}": matrix.counts[(lvl, risk)] for lvl, risk in CATEGORY_KEYS},
        "fractions": {f"{lvl}-{risk}": pct[(lvl, risk)] for lvl, risk in CATEGORY_KEYS},
        "safe_share": matrix.safe_share(),
    }
    out["phi"] = association_score(matrix) if matrix.total else None
    return out


def render_tables(
    overview: list[ProjectOverviewRow],
    matrix: CategoryMatrix,
    per_project: Mapping[str, CategoryMatrix],
    top_risky: list[ClassTableRow],
    top_safe: list[ClassTableRow],
) -> str:
    """Human-readable report with thousands separators and 2-decimal percentages."""
    lines = ["Overview", ""]
    header = ("project", "# files", "# C1", "# C2", "# A", "# F")
    rows = [
        (r.project, *(f"{v:,}" for v in (r.file_count, r.c1_count, r.c2_count, r.rank_a_count, r.rank_f_count)))
        for r in overview
    ]
    lines += _grid(header, rows, right_from=1)

    lines += ["", f"Category matrix (pooled over {matrix.total:,} cases)", ""]
    pct = matrix.percentages
    rows = [
        (f"{lvl}-{risk}", f"{matrix.counts[(lvl, risk)]:,}", f"{100 * pct[(lvl, risk)]:.2f}%")
        for lvl, risk in CATEGORY_KEYS
    ]
    lines += _grid(("category", "cases", "share"), rows, right_from=1)

    lines += ["", "Association (phi) per project", ""]
    rows = []
    for name in sorted(per_project):
        m = per_project[name]
        rows.append((name, f"{m.total:,}", f"{association_score(m):.3f}" if m.total else "n/a"))
    rows.append(("(pooled)", f"{matrix.total:,}", f"{association_score(matrix):.3f}" if matrix.total else "n/a"))
    lines += _grid(("project", "cases", "phi"), rows, right_from=1)
    lines.append(PHI_DEFINITION)

    for title, table in (("Top classes, Risky", top_risky), ("Top classes, Safe", top_safe)):
        lines += ["", title, ""]
        rows = [(r.construct_class, r.level_category, r.risk_category, f"{r.case_count:,}") for r in table]
        lines += _grid(("class", "level", "rank", "# cases"), rows, right_from=3)
    return "\n".join(lines) + "\n"


def _grid(header: tuple, rows: list[tuple], right_from: int) -> list[str]:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]

    def fmt(row: tuple) -> str:
        cells = [
            str(v).rjust(w) if i >= right_from else str(v).ljust(w)
            for i, (v, w) in enumerate(zip(row, widths))
        ]
        return "  ".join(cells).rstrip()

    return [fmt(header), "  ".join("-" * w for w in widths)] + [fmt(r) for r in rows]
