"""Best-effort SQL lexer for the SQLite dialect.

The lexer is total: any input string yields a token list. Whitespace and
comments are dropped, keywords and identifiers are lower-cased (quoted
identifiers are unquoted first), and literals keep their source text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

KEYWORD = "keyword"
IDENTIFIER = "identifier"
LITERAL = "literal"
OPERATOR = "operator"
PUNCT = "punct"

# SQLite keyword list, minus words that are routinely used as function or
# column names (e.g. "replace", "date").
KEYWORDS = frozenset(
    """
    abort action add after all alter always analyze and as asc attach
    autoincrement before begin between by cascade case cast check collate
    column commit conflict constraint create cross current current_date
    current_time current_timestamp database default deferrable deferred
    delete desc detach distinct do drop each else end escape except
    exclude exclusive exists explain fail false filter first following for
    foreign from full generated glob group groups having if ignore
    immediate in index indexed initially inner insert instead intersect
    into is isnull join key last left like limit match materialized
    natural no not nothing notnull null nulls of offset on or order others
    outer over partition plan pragma preceding primary query raise range
    recursive references regexp reindex release rename restrict returning
    right rollback row rows savepoint select set table temp temporary then
    ties to transaction trigger true unbounded union unique update using
    vacuum values view virtual when where window with without
    """.split()
)

_MULTI_CHAR_OPERATORS = ("->>", "<=", ">=", "<>", "!=", "==", "||", "<<", ">>", "->")
_PUNCT = set("(),;.")
_QUOTE_CLOSERS = {'"': '"', "`": "`", "[": "]"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    # Source span; ignored by equality so normalized sequences compare by content.
    start: int = field(default=0, compare=False)
    end: int = field(default=0, compare=False)
    quote: str = field(default="", compare=False)

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.text!r})"


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_" or ord(ch) > 0x7F


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch in "_$" or ord(ch) > 0x7F


def _scan_number(sql: str, i: int) -> int:
    n = len(sql)
    if sql.startswith(("0x", "0X"), i) and i + 2 < n and sql[i + 2] in "0123456789abcdefABCDEF":
        j = i + 2
        while j < n and sql[j] in "0123456789abcdefABCDEF":
            j += 1
        return j
    j = i
    while j < n and sql[j].isdigit():
        j += 1
    if j < n and sql[j] == ".":
        j += 1
        while j < n and sql[j].isdigit():
            j += 1
    if j < n and sql[j] in "eE":
        k = j + 1
        if k < n and sql[k] in "+-":
            k += 1
        if k < n and sql[k].isdigit():
            while k < n and sql[k].isdigit():
                k += 1
            j = k
    return j


def _scan_quoted(sql: str, i: int, closer: str) -> tuple[int, str]:
    """Return (end index, unescaped body). Unterminated quotes run to end of input."""
    n = len(sql)
    j = i + 1
    body = []
    while j < n:
        ch = sql[j]
        if ch == closer:
            if closer != "]" and j + 1 < n and sql[j + 1] == closer:
                body.append(ch)
                j += 2
                continue
            return j + 1, "".join(body)
        body.append(ch)
        j += 1
    return n, "".join(body)


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if sql.startswith("--", i):
            nl = sql.find("\n", i)
            i = n if nl < 0 else nl + 1
            continue
        if sql.startswith("/*", i):
            close = sql.find("*/", i + 2)
            i = n if close < 0 else close + 2
            continue
        if ch == "'":
            j, _ = _scan_quoted(sql, i, "'")
            tokens.append(Token(LITERAL, sql[i:j], i, j))
            i = j
            continue
        if ch in "xX" and i + 1 < n and sql[i + 1] == "'":
            j, _ = _scan_quoted(sql, i + 1, "'")
            tokens.append(Token(LITERAL, sql[i:j], i, j))
            i = j
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            j = _scan_number(sql, i)
            tokens.append(Token(LITERAL, sql[i:j], i, j))
            i = j
            continue
        if ch in _QUOTE_CLOSERS:
            j, body = _scan_quoted(sql, i, _QUOTE_CLOSERS[ch])
            tokens.append(Token(IDENTIFIER, body.lower(), i, j, quote=ch))
            i = j
            continue
        if _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_char(sql[j]):
                j += 1
            word = sql[i:j].lower()
            kind = KEYWORD if word in KEYWORDS else IDENTIFIER
            tokens.append(Token(kind, word, i, j))
            i = j
            continue
        for op in _MULTI_CHAR_OPERATORS:
            if sql.startswith(op, i):
                tokens.append(Token(OPERATOR, op, i, i + len(op)))
                i += len(op)
                break
        else:
            kind = PUNCT if ch in _PUNCT else OPERATOR
            tokens.append(Token(kind, ch, i, i + 1))
            i += 1
    return tokens


def _needs_quoting(name: str) -> bool:
    if not name or name in KEYWORDS:
        return True
    if not _is_ident_start(name[0]) or not all(_is_ident_char(c) for c in name):
        return True
    # lower() is not always idempotent on exotic code points
    return name.lower() != name


def render(tokens: Iterable[Token]) -> str:
    """Join tokens with single spaces, re-quoting identifiers that need it."""
    parts = []
    for tok in tokens:
        if tok.kind == IDENTIFIER and _needs_quoting(tok.text):
            parts.append('"' + tok.text.replace('"', '""') + '"')
        else:
            parts.append(tok.text)
    return " ".join(parts)


def token_texts(tokens: Sequence[Token]) -> list[str]:
    return [t.text for t in tokens]
