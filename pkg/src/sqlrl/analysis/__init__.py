"""Lexing, parsing and set measures over SQL text."""

from __future__ import annotations

from typing import AbstractSet, Sequence

from .lexer import IDENTIFIER, KEYWORD, LITERAL, OPERATOR, PUNCT, Token, render, tokenize
from .parser import SqlParseError, parse
from .schema import SchemaCatalog, SchemaItemSet, extract_schema_items


def ngram_set(tokens: Sequence[Token], n: int = 2) -> frozenset:
    """All contiguous n-token windows, as tuples of token text."""
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    texts = [t.text if isinstance(t, Token) else t for t in tokens]
    return frozenset(tuple(texts[i:i + n]) for i in range(len(texts) - n + 1))


def jaccard(a: AbstractSet, b: AbstractSet) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


__all__ = [
    "IDENTIFIER", "KEYWORD", "LITERAL", "OPERATOR", "PUNCT",
    "SchemaCatalog", "SchemaItemSet", "SqlParseError", "Token",
    "extract_schema_items", "jaccard", "ngram_set", "parse", "render", "tokenize",
]
