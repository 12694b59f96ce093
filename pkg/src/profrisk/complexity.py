"""McCabe cyclomatic complexity per block and the A-F rank scale.

Decision points follow radon's ``ComplexityVisitor`` so scores line up with
it exactly:

* ``if``/``elif`` and conditional expressions: +1
* ``for``/``async for``/``while``: +1, and +1 more when the loop has ``else``
* ``try``: +1 per ``except`` handler, +1 when it has ``else``
* boolean operators: +1 per ``and``/``or``
* comprehension clauses: +1 per ``for``, +1 per ``if``
* ``assert``: +1 (its test expression is not inspected)
* ``match``: +1 per ``case``, not counting an irrefutable ``case _``/``case x``

Decisions inside nested functions and classes, decorators, argument defaults
and annotations never count towards the enclosing block. Lambdas are not
blocks; their decisions count towards the enclosing block.
"""

from __future__ import annotations

import ast
import enum
from dataclasses import dataclass
from typing import Final, Iterable, Optional

from .syntax import BlockKind, BlockSpan, SyntaxTree, directory_of, enumerate_blocks

RANK_UPPER_BOUNDS: Final = ((5, "A"), (10, "B"), (20, "C"), (30, "D"), (40, "E"))


class Rank(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"

    @property
    def risk_category(self) -> str:
        if self is Rank.A:
            return "Safe"
        if self is Rank.F:
            return "Risky"
        return "Intermediate"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ComplexityBlock:
    project: str
    directory: str
    file: str
    kind: BlockKind
    qualified_name: str
    score: int
    rank: Rank
    start_line: int
    end_line: int


def rank_of(score: int) -> Rank:
    """Map a complexity score to its letter: A 1-5, B 6-10, C 11-20, D 21-30, E 31-40, F 41+."""
    if score < 1:
        raise ValueError(f"complexity score must be >= 1, got {score}")
    for bound, letter in RANK_UPPER_BOUNDS:
        if score <= bound:
            return Rank(letter)
    return Rank.F


def node_decisions(node: ast.AST) -> int:
    """Decision points contributed by ``node`` itself (children excluded)."""
    if isinstance(node, (ast.If, ast.IfExp, ast.Assert)):
        return 1
    if isinstance(node, (ast.For, ast.AsyncFor, ast.While)):
        return 1 + bool(node.orelse)
    if isinstance(node, ast.Try):
        return len(node.handlers) + bool(node.orelse)
    if isinstance(node, ast.BoolOp):
        return len(node.values) - 1
    if isinstance(node, ast.comprehension):
        return 1 + len(node.ifs)
    if isinstance(node, ast.Match):
        catch_all = any(getattr(case.pattern, "pattern", False) is None for case in node.cases)
        return max(0, len(node.cases) - catch_all)
    return 0


def body_decisions(definition: ast.AST) -> int:
    """Decision points in a definition's own body, nested definitions excluded."""
    total = 0
    stack = list(getattr(definition, "body", ()))
    while stack:
        node = stack.pop()
        total += node_decisions(node)
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef, ast.Assert)):
            continue
        stack.extend(ast.iter_child_nodes(node))
    return total


def cyclomatic_complexity(block: BlockSpan, tree: Optional[SyntaxTree] = None) -> int:
    """``1 + decisions`` over the block's body, nested blocks excluded.

    For a class block this is the class-level statements only; see
    :func:`class_score` for the aggregate reported for classes.
    """
    if block.node is None:
        raise ValueError(f"block {block.qualified_name!r} carries no syntax node")
    return 1 + body_decisions(block.node)


def class_score(class_decisions: int, method_scores: Iterable[int]) -> int:
    """Class score as radon reports it.

    ``int((1 + class-level decisions + sum(method scores)) / n) + (n > 1)``
    for ``n`` methods: roughly the mean method score plus one.
    """
    scores = list(method_scores)
    if not scores:
        raise ValueError("class score needs at least one method")
    real = 1 + class_decisions + sum(scores)
    return int(real / len(scores)) + (len(scores) > 1)


def analyze_file_complexity(
    tree: SyntaxTree, project: str = "", blocks: Optional[list[BlockSpan]] = None
) -> list[ComplexityBlock]:
    """Score every function and method, plus every class that has methods."""
    if blocks is None:
        blocks = enumerate_blocks(tree)
    path = tree.source_path
    directory = directory_of(path)
    scores: dict[int, int] = {}
    for i, block in enumerate(blocks):
        if block.kind != "class":
            scores[i] = cyclomatic_complexity(block, tree)
    for i, block in enumerate(blocks):
        if block.kind != "class":
            continue
        methods = [scores[j] for j, b in enumerate(blocks) if b.kind == "method" and b.parent is block]
        if methods:
            scores[i] = class_score(body_decisions(block.node), methods)

    out = []
    for i, block in enumerate(blocks):
        if i not in scores:
            continue
        score = scores[i]
        out.append(
            ComplexityBlock(
                project, directory, path, block.kind, block.qualified_name,
                score, rank_of(score), block.start_line, block.end_line,
            )
        )
    return out
