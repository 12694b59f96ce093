"""Parsing Python source and enumerating its function, method and class blocks."""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from typing import Final, Literal, Optional

# Every file is parsed against this grammar level, whatever the interpreter.
GRAMMAR_VERSION: Final = (3, 10)
GRAMMAR_LABEL: Final = "python-%d.%d" % GRAMMAR_VERSION

BlockKind = Literal["function", "method", "class"]

_NEWLINE = re.compile(r"\r\n|\r|\n")
DEFINITION_NODES: Final = (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)


class ParseError(Exception):
    """Source text that cannot be decoded or parsed."""

    def __init__(self, line: int, message: str, path: str = "") -> None:
        self.line = line
        self.message = message
        self.path = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class SyntaxTree:
    root: ast.Module
    source_path: str
    line_count: int


@dataclass(frozen=True)
class BlockSpan:
    kind: BlockKind
    qualified_name: str
    start_line: int
    end_line: int
    parent: Optional[BlockSpan] = None
    node: Optional[ast.AST] = field(default=None, repr=False, compare=False)

    def contains(self, start: int, end: int) -> bool:
        return self.start_line <= start and end <= self.end_line


def count_lines(text: str) -> int:
    """Number of physical lines, counting an unterminated last line."""
    if not text:
        return 0
    breaks = len(_NEWLINE.findall(text))
    return breaks if text.endswith(("\n", "\r")) else breaks + 1


def decode_source(data: bytes | str, path: str = "") -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        line = data[: exc.start].count(b"\n") + 1
        raise ParseError(line, f"invalid UTF-8: {exc.reason}", path) from None


def parse_source(text: bytes | str, path: str = "<string>") -> SyntaxTree:
    """Parse ``text`` into a :class:`SyntaxTree`.

    Bytes are decoded as UTF-8 (an optional BOM is accepted). Anything the
    fixed grammar rejects raises :class:`ParseError` carrying the offending line.
    """
    source = decode_source(text, path)
    try:
        root = ast.parse(source, filename=path, feature_version=GRAMMAR_VERSION)
    except SyntaxError as exc:
        raise ParseError(exc.lineno or 1, exc.msg or "invalid syntax", path) from None
    except (ValueError, RecursionError, MemoryError) as exc:
        # null bytes (ValueError on 3.10) and pathologically deep nesting
        raise ParseError(1, str(exc) or type(exc).__name__, path) from None
    return SyntaxTree(root=root, source_path=path, line_count=count_lines(source))


def enumerate_blocks(tree: SyntaxTree) -> list[BlockSpan]:
    """All function, method and class definitions in source order.

    A method is a function defined directly in a class body. Spans run from
    the ``def``/``class`` line (decorators excluded) to the last body line.
    Lambdas are not blocks.
    """
    blocks: list[BlockSpan] = []

    def visit(node: ast.AST, parent: Optional[BlockSpan]) -> None:
        for child in ast.iter_child_nodes(node):
            if isinstance(child, DEFINITION_NODES):
                if isinstance(child, ast.ClassDef):
                    kind: BlockKind = "class"
                elif parent is not None and parent.kind == "class":
                    kind = "method"
                else:
                    kind = "function"
                name = child.name if parent is None else f"{parent.qualified_name}.{child.name}"
                block = BlockSpan(kind, name, child.lineno, child.end_lineno or child.lineno, parent, child)
                blocks.append(block)
                visit(child, block)
            else:
                visit(child, parent)

    visit(tree.root, None)
    blocks.sort(key=lambda b: (b.start_line, b.node.col_offset if b.node is not None else 0))
    return blocks


def directory_of(path: str) -> str:
    """Directory label of a corpus-relative posix path (``"."`` at the root)."""
    head, sep, _ = path.rpartition("/")
    return head if sep and head else "."
