"""A small s-expression reader that keeps source positions."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class ParseError(Exception):
    def __init__(self, message: str, span: Span | None = None, path: str | None = None):
        self.message = message
        self.span = span
        self.path = path
        super().__init__(str(self))

    def __str__(self) -> str:
        where = ""
        if self.path:
            where = self.path + ":"
        if self.span:
            where += f"{self.span}:"
        return f"{where} {self.message}" if where else self.message


@dataclass(frozen=True)
class Atom:
    text: str
    span: Span

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SList:
    items: tuple
    span: Span

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __str__(self) -> str:
        return "(" + " ".join(str(x) for x in self.items) + ")"


SExpr = Atom | SList


def read_all(text: str) -> list[SExpr]:
    """Parse every top-level expression in ``text`` (``;`` starts a comment)."""
    out: list[SExpr] = []
    stack: list[tuple[Span, list]] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch.isspace():
            i, col = i + 1, col + 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        here = Span(line, col)
        if ch == "(":
            stack.append((here, []))
            i, col = i + 1, col + 1
            continue
        if ch == ")":
            if not stack:
                raise ParseError("unbalanced ')'", here)
            start, items = stack.pop()
            node = SList(tuple(items), start)
            (stack[-1][1] if stack else out).append(node)
            i, col = i + 1, col + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "();":
            j += 1
        atom = Atom(text[i:j], here)
        (stack[-1][1] if stack else out).append(atom)
        col += j - i
        i = j
    if stack:
        raise ParseError("unbalanced '('", stack[-1][0])
    return out
