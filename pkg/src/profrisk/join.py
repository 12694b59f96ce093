"""Pairing proficient-construct occurrences with their enclosing ranked block."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Collection, Iterable, Optional

from .complexity import ComplexityBlock, Rank
from .proficiency import CompetencyLevel, ProficiencyOccurrence

LEVEL_CATEGORY = {CompetencyLevel.C1: "Advance", CompetencyLevel.C2: "Mastery"}
RISK_CATEGORY = {Rank.A: "Safe", Rank.F: "Risky"}

FileKey = tuple  # (project, file)


class InconsistentInput(ValueError):
    """An occurrence refers to a file for which no block list was produced."""


@dataclass(frozen=True)
class JoinedCase:
    occurrence: ProficiencyOccurrence
    block: ComplexityBlock
    level_category: str
    risk_category: str


@dataclass
class JoinResult:
    cases: list[JoinedCase] = field(default_factory=list)
    discarded_module_level: int = 0
    discarded_by_rank: int = 0
    # Occurrences whose level has no Advance/Mastery category.
    discarded_by_level: int = 0

    @property
    def discarded(self) -> int:
        return self.discarded_module_level + self.discarded_by_rank + self.discarded_by_level

    def merge(self, other: JoinResult) -> JoinResult:
        merged = JoinResult(
            self.cases + other.cases,
            self.discarded_module_level + other.discarded_module_level,
            self.discarded_by_rank + other.discarded_by_rank,
            self.discarded_by_level + other.discarded_by_level,
        )
        merged.cases.sort(key=case_sort_key)
        return merged


def file_key(item: ProficiencyOccurrence | ComplexityBlock) -> FileKey:
    return (item.project, item.file)


def case_sort_key(case: JoinedCase) -> tuple:
    occ = case.occurrence
    return (occ.project, occ.file, occ.start_line, occ.construct_class, occ.end_line)


def category_of(case: JoinedCase) -> tuple[str, str]:
    return (case.level_category, case.risk_category)


def innermost_block(
    occ: ProficiencyOccurrence, blocks: Iterable[ComplexityBlock]
) -> Optional[ComplexityBlock]:
    """Smallest function/method block containing the whole occurrence span.

    Falls back to the smallest containing class block when no function or
    method contains it.
    """
    best: Optional[ComplexityBlock] = None
    best_key = None
    for block in blocks:
        if not (block.start_line <= occ.start_line and occ.end_line <= block.end_line):
            continue
        key = (block.kind == "class", block.end_line - block.start_line, -block.start_line)
        if best_key is None or key < best_key:
            best, best_key = block, key
    return best


def _innermost_sweep(
    occs: list[ProficiencyOccurrence], blocks: list[ComplexityBlock]
) -> list[Optional[ComplexityBlock]]:
    """Innermost containing block for each occurrence, by a single sweep.

    Blocks must nest like parsed code does: any two spans are disjoint or
    one contains the other. Blocks whose span starts at or before an
    occurrence's start are kept on a stack of currently open spans; the
    innermost container is the topmost open span reaching the occurrence's
    last line.
    """
    ordered = sorted(blocks, key=lambda b: (b.start_line, -b.end_line))
    found: list[Optional[ComplexityBlock]] = [None] * len(occs)
    stack: list[ComplexityBlock] = []
    nxt = 0
    for i in sorted(range(len(occs)), key=lambda k: occs[k].start_line):
        start, end = occs[i].start_line, occs[i].end_line
        while nxt < len(ordered) and ordered[nxt].start_line <= start:
            block = ordered[nxt]
            while stack and stack[-1].end_line < block.start_line:
                stack.pop()
            stack.append(block)
            nxt += 1
        while stack and stack[-1].end_line < start:
            stack.pop()
        for block in reversed(stack):
            if block.end_line >= end:
                found[i] = block
                break
    return found


def join_cases(
    occs: Iterable[ProficiencyOccurrence],
    blocks: Iterable[ComplexityBlock],
    parsed_files: Optional[Collection[FileKey]] = None,
    keep_ranks: Collection[Rank | str] = (Rank.A, Rank.F),
) -> JoinResult:
    """Join each occurrence to its innermost enclosing block.

    Every occurrence ends up in exactly one bucket: a case, a module-level
    discard (no enclosing block), a rank discard (innermost block not in
    ``keep_ranks`` or ranked B-E), or a level discard (not C1/C2).

    ``parsed_files`` lists the ``(project, file)`` keys that went through
    block analysis; an occurrence from any other file raises
    :class:`InconsistentInput`. Without it, every occurrence's file is
    assumed analysed.
    """
    wanted_ranks = {Rank(r) for r in keep_ranks}
    by_file: dict[FileKey, list[ComplexityBlock]] = defaultdict(list)
    for block in blocks:
        by_file[file_key(block)].append(block)
    known = None if parsed_files is None else set(parsed_files) | set(by_file)

    occs_by_file: dict[FileKey, list[ProficiencyOccurrence]] = defaultdict(list)
    for occ in occs:
        occs_by_file[file_key(occ)].append(occ)

    result = JoinResult()
    for key in sorted(occs_by_file):
        if known is not None and key not in known:
            project, file = key
            raise InconsistentInput(f"no block list for {project}:{file}")
        file_occs = occs_by_file[key]
        file_blocks = by_file.get(key, [])
        routines = _innermost_sweep(file_occs, [b for b in file_blocks if b.kind != "class"])
        classes = _innermost_sweep(file_occs, [b for b in file_blocks if b.kind == "class"])
        for occ, routine, cls in zip(file_occs, routines, classes):
            _place(result, occ, routine or cls, wanted_ranks)
    result.cases.sort(key=case_sort_key)
    return result


def _place(
    result: JoinResult,
    occ: ProficiencyOccurrence,
    block: Optional[ComplexityBlock],
    wanted_ranks: set[Rank],
) -> None:
    level_category = LEVEL_CATEGORY.get(occ.level)
    if level_category is None:
        result.discarded_by_level += 1
        return
    if block is None:
        result.discarded_module_level += 1
        return
    risk_category = RISK_CATEGORY.get(block.rank)
    if risk_category is None or block.rank not in wanted_ranks:
        result.discarded_by_rank += 1
        return
    result.cases.append(JoinedCase(occ, block, level_category, risk_category))
