"""Tokenizer for ``.ikm`` model files."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

from .ast import Span

KEYWORDS = frozenset(
    """
    env machine protocol system over var msg guard action event state init on
    complete from to when do send skip pre post sends inst connect external
    stimulus check invariant prepost connector interaction strict loose
    true false and or not
    """.split()
)

# longest first so that the alternation munches maximally
SYMBOLS = (
    ":=", "==", "!=", "<=", ">=", "..", "--",
    "{", "}", "(", ")", "[", "]", ";", ",", ":", ".", "<", ">", "+", "-", "*", "=",
)

IDENT = "ident"
INT = "int"
KEYWORD = "keyword"
SYMBOL = "symbol"
EOF = "eof"

MAX_INT_DIGITS = 18


class Token(NamedTuple):
    kind: str
    text: str
    span: Span


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    span: Span

    def __str__(self):
        return f"{self.span.line}:{self.span.column}: {self.severity}: {self.message}"


class DslError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


_TOKEN = re.compile(
    r"(?P<nl>\n)|(?P<ws>[ \t\r]+)|(?P<comment>//[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>[0-9]+)"
    r"|(?P<sym>" + "|".join(re.escape(s) for s in SYMBOLS) + r")"
    r"|(?P<bad>.)",
    re.DOTALL,
)


def tokenize(text: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
            continue
        if kind in ("ws", "comment"):
            continue
        word = m.group()
        span = Span(line, m.start() - line_start + 1, len(word))
        if kind == "ident":
            tokens.append(Token(KEYWORD if word in KEYWORDS else IDENT, word, span))
        elif kind == "int":
            if len(word) > MAX_INT_DIGITS:
                diags.append(Diagnostic("error", "integer literal is too long", span))
            tokens.append(Token(INT, word, span))
        elif kind == "sym":
            tokens.append(Token(SYMBOL, word, span))
        else:
            diags.append(Diagnostic("error", f"unexpected character {word!r}", span))
    tokens.append(Token(EOF, "", Span(line, len(text) - line_start + 1, 0)))
    return tokens, diags
