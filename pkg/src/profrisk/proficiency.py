"""Detection of proficiency-level constructs and their competency levels.

Construct classes live in a :class:`ConstructRegistry` that maps a class
name to a competency level and a detector id. Detectors are purely
syntactic; ``enumerate(...)`` is recognised by its bare callee name even if
the name was rebound.

Detector ids::

    listcomp:simple    list comprehension, one ``for``, element not a comprehension
    listcomp:nested    any other list comprehension
    dictcomp:simple    / dictcomp:nested, setcomp:simple / setcomp:nested
    genexp             generator expression
    yield              ``yield`` or ``yield from`` expression
    call:<name>        call whose callee is the bare name ``<name>``
    node:<AstType>     any node of the named ``ast`` class (e.g. ``node:With``)
"""

from __future__ import annotations

import ast
import enum
import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Final, Iterable, Mapping

from .syntax import SyntaxTree, directory_of


class CompetencyLevel(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"
    B1 = "B1"
    B2 = "B2"
    C1 = "C1"
    C2 = "C2"

    @property
    def category(self) -> str:
        if self is CompetencyLevel.C1:
            return "Advance"
        if self is CompetencyLevel.C2:
            return "Mastery"
        return "Basic" if self.value.startswith("A") else "Intermediate"

    def __str__(self) -> str:
        return self.value


PROFICIENT_LEVELS: Final = frozenset({CompetencyLevel.C1, CompetencyLevel.C2})


class RegistryError(ValueError):
    """Malformed registry file or entry."""


@dataclass(frozen=True)
class RegistryEntry:
    construct_class: str
    detector: str
    level: CompetencyLevel


@dataclass(frozen=True)
class ProficiencyOccurrence:
    project: str
    directory: str
    file: str
    construct_class: str
    start_line: int
    end_line: int
    level: CompetencyLevel


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------

_COMPREHENSIONS = (ast.ListComp, ast.SetComp, ast.DictComp, ast.GeneratorExp)


def _is_simple(node: ast.ListComp | ast.SetComp | ast.DictComp) -> bool:
    if len(node.generators) != 1:
        return False
    elements = (node.key, node.value) if isinstance(node, ast.DictComp) else (node.elt,)
    return not any(isinstance(e, _COMPREHENSIONS) for e in elements)


def _comprehension(node_type: type, simple: bool) -> Callable[[ast.AST], bool]:
    def match(node: ast.AST) -> bool:
        return isinstance(node, node_type) and _is_simple(node) == simple

    return match


def _bare_call(name: str) -> Callable[[ast.AST], bool]:
    def match(node: ast.AST) -> bool:
        return isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == name

    return match


def _node_type(name: str) -> Callable[[ast.AST], bool]:
    node_type = getattr(ast, name, None)
    if not (isinstance(node_type, type) and issubclass(node_type, ast.AST)):
        raise RegistryError(f"unknown ast node type {name!r}")

    def match(node: ast.AST) -> bool:
        return isinstance(node, node_type)

    return match


_FIXED_DETECTORS: Final[dict[str, Callable[[ast.AST], bool]]] = {
    "listcomp:simple": _comprehension(ast.ListComp, True),
    "listcomp:nested": _comprehension(ast.ListComp, False),
    "dictcomp:simple": _comprehension(ast.DictComp, True),
    "dictcomp:nested": _comprehension(ast.DictComp, False),
    "setcomp:simple": _comprehension(ast.SetComp, True),
    "setcomp:nested": _comprehension(ast.SetComp, False),
    "genexp": lambda node: isinstance(node, ast.GeneratorExp),
    "yield": lambda node: isinstance(node, (ast.Yield, ast.YieldFrom)),
}


def resolve_detector(detector_id: str) -> Callable[[ast.AST], bool]:
    if detector_id in _FIXED_DETECTORS:
        return _FIXED_DETECTORS[detector_id]
    prefix, _, arg = detector_id.partition(":")
    if prefix == "call" and arg.isidentifier():
        return _bare_call(arg)
    if prefix == "node" and arg:
        return _node_type(arg)
    raise RegistryError(f"unknown detector {detector_id!r}")


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


class ConstructRegistry:
    """Ordered, read-only mapping of construct class name to entry."""

    def __init__(self, entries: Iterable[RegistryEntry]) -> None:
        self._entries: dict[str, RegistryEntry] = {}
        matchers = []
        for entry in entries:
            if entry.construct_class in self._entries:
                raise RegistryError(f"duplicate construct class {entry.construct_class!r}")
            if not entry.construct_class or "|" in entry.construct_class:
                raise RegistryError(f"invalid construct class name {entry.construct_class!r}")
            self._entries[entry.construct_class] = entry
            matchers.append((entry, resolve_detector(entry.detector)))
        self._matchers = tuple(matchers)

    def __reduce__(self):
        # detectors are closures; rebuild them from the entries on unpickle
        return (type(self), (tuple(self._entries.values()),))

    def __getitem__(self, construct_class: str) -> RegistryEntry:
        return self._entries[construct_class]

    def __contains__(self, construct_class: object) -> bool:
        return construct_class in self._entries

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def level_of(self, construct_class: str) -> CompetencyLevel:
        return self._entries[construct_class].level

    def matches(self, node: ast.AST) -> list[RegistryEntry]:
        return [entry for entry, match in self._matchers if match(node)]

    def to_text(self) -> str:
        return "".join(f"{e.construct_class} | {e.detector} | {e.level.value}\n" for e in self)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_text(cls, text: str, source: str = "<registry>") -> ConstructRegistry:
        """Parse ``class-name | detector-id | level`` lines; lines starting with ``#`` are comments."""
        entries = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split("|")]
            if len(fields) != 3 or not all(fields):
                raise RegistryError(f"{source}:{lineno}: expected 'class-name | detector-id | level'")
            name, detector, level = fields
            try:
                parsed_level = CompetencyLevel(level.upper())
            except ValueError:
                raise RegistryError(f"{source}:{lineno}: unknown level {level!r}") from None
            entries.append(RegistryEntry(name, detector, parsed_level))
        try:
            return cls(entries)
        except RegistryError as exc:
            raise RegistryError(f"{source}: {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> ConstructRegistry:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise RegistryError(f"cannot read registry {path}: {exc}") from None
        return cls.from_text(text, str(path))


def default_registry() -> ConstructRegistry:
    text = resources.files("profrisk").joinpath("data/registry.txt").read_text(encoding="utf-8")
    return ConstructRegistry.from_text(text, "default registry")


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def classify_constructs(
    tree: SyntaxTree, registry: ConstructRegistry, project: str = ""
) -> list[ProficiencyOccurrence]:
    """One occurrence per (node, matching entry), ordered by position in the file."""
    path = tree.source_path
    directory = directory_of(path)
    found = []
    for node in ast.walk(tree.root):
        if not hasattr(node, "lineno"):
            continue
        for rank, entry in enumerate(registry.matches(node)):
            end = getattr(node, "end_lineno", None) or node.lineno
            occurrence = ProficiencyOccurrence(
                project, directory, path, entry.construct_class, node.lineno, end, entry.level
            )
            found.append(((node.lineno, node.col_offset, end, getattr(node, "end_col_offset", 0)), rank, occurrence))
    found.sort(key=lambda item: (item[0], item[1]))
    return [occurrence for _, _, occurrence in found]


def filter_by_level(
    occs: Iterable[ProficiencyOccurrence], keep: Iterable[CompetencyLevel | str]
) -> list[ProficiencyOccurrence]:
    wanted = {CompetencyLevel(k) for k in keep}
    return [o for o in occs if o.level in wanted]


def level_counts(occs: Iterable[ProficiencyOccurrence]) -> Mapping[CompetencyLevel, int]:
    counts = {level: 0 for level in CompetencyLevel}
    for occ in occs:
        counts[occ.level] += 1
    return counts
