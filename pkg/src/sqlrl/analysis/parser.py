"""Recursive-descent parser for the SQLite statements found in BIRD/Spider.

The parser does not build a full expression tree. It records exactly what
schema-item extraction needs: the sources of every SELECT scope, the column
references that appear in each scope, nested queries, and output column
names. Anything outside the supported grammar raises ``SqlParseError``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .lexer import IDENTIFIER, KEYWORD, LITERAL, OPERATOR, PUNCT, Token, tokenize


class SqlParseError(ValueError):
    pass


# Keywords SQLite accepts as plain identifiers (its "fallback" list).
FALLBACK_KEYWORDS = frozenset(
    """
    abort action after always analyze asc attach before begin by cascade
    column conflict current database deferred desc detach do each end
    exclude exclusive explain fail filter first following for generated
    groups if ignore immediate initially instead key last match
    materialized no nulls of offset others over partition plan pragma
    preceding query raise range recursive reindex release rename restrict
    row rows savepoint temp temporary ties trigger unbounded vacuum view
    virtual window with without
    """.split()
)

_COMPARE_OPS = {"=": 4, "==": 4, "!=": 4, "<>": 4,
                "<": 5, "<=": 5, ">": 5, ">=": 5,
                "&": 6, "|": 6, "<<": 6, ">>": 6,
                "+": 7, "-": 7,
                "*": 8, "/": 8, "%": 8,
                "||": 9, "->": 9, "->>": 9}
_UNARY_PREC = 10


@dataclass
class ColumnRef:
    qualifier: Optional[str]
    name: str
    # bare double-quoted identifiers fall back to string literals in SQLite
    quoted: bool = False


@dataclass
class TableRef:
    name: str
    alias: Optional[str] = None


@dataclass
class DerivedRef:
    query: Optional["Query"]
    alias: Optional[str] = None


Source = Union[TableRef, DerivedRef]


@dataclass
class UsingRef:
    column: str
    left: list
    right: Source


@dataclass
class SelectCore:
    sources: list = field(default_factory=list)
    refs: list = field(default_factory=list)
    using: list = field(default_factory=list)
    subqueries: list = field(default_factory=list)
    # (output name or None, direct column reference or None)
    outputs: list = field(default_factory=list)
    # None for bare "*", qualifier string for "q.*"
    stars: list = field(default_factory=list)
    in_tables: list = field(default_factory=list)
    output_aliases: set = field(default_factory=set)  # explicit AS names only


@dataclass
class Cte:
    name: str
    columns: list
    query: "Query"


@dataclass
class Query:
    ctes: list = field(default_factory=list)
    cores: list = field(default_factory=list)
    # ORDER BY / LIMIT of a compound select
    tail: SelectCore = field(default_factory=SelectCore)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0
        self.ctx: list[SelectCore] = []

    # -- token helpers -------------------------------------------------
    def peek(self, offset: int = 0) -> Optional[Token]:
        i = self.pos + offset
        return self.toks[i] if i < len(self.toks) else None

    def at_kw(self, *words: str, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t is not None and t.kind == KEYWORD and t.text in words

    def at_punct(self, ch: str, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t is not None and t.kind == PUNCT and t.text == ch

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == OPERATOR and t.text in ops

    def advance(self) -> Token:
        t = self.peek()
        if t is None:
            raise SqlParseError("unexpected end of input")
        self.pos += 1
        return t

    def accept_kw(self, *words: str) -> bool:
        if self.at_kw(*words):
            self.pos += 1
            return True
        return False

    def expect_kw(self, word: str) -> None:
        if not self.accept_kw(word):
            self.fail(f"expected {word.upper()}")

    def expect_punct(self, ch: str) -> None:
        if not self.at_punct(ch):
            self.fail(f"expected {ch!r}")
        self.pos += 1

    def fail(self, msg: str):
        t = self.peek()
        where = "end of input" if t is None else repr(t.text)
        raise SqlParseError(f"{msg} near {where}")

    def is_name(self, offset: int = 0, allow_fallback: bool = True) -> bool:
        t = self.peek(offset)
        if t is None:
            return False
        if t.kind == IDENTIFIER:
            return True
        return allow_fallback and t.kind == KEYWORD and t.text in FALLBACK_KEYWORDS

    def name(self) -> Token:
        if not self.is_name():
            self.fail("expected identifier")
        return self.advance()

    @property
    def core(self) -> SelectCore:
        return self.ctx[-1]

    # -- statements ----------------------------------------------------
    def statement(self):
        if self.at_kw("explain"):
            self.advance()
            if self.accept_kw("query"):
                self.expect_kw("plan")
        if self.at_kw("select", "with", "values"):
            stmt = self.query()
        elif self.at_kw("insert") or (self.peek() is not None and self.peek().text == "replace" and self.at_kw("into", offset=1)):
            stmt = self.insert()
        elif self.at_kw("update"):
            stmt = self.update()
        elif self.at_kw("delete"):
            stmt = self.delete()
        else:
            self.fail("expected a statement")
        while self.at_punct(";"):
            self.advance()
        if self.peek() is not None:
            self.fail("unexpected trailing input")
        return stmt

    def query(self) -> Query:
        q = Query()
        if self.accept_kw("with"):
            self.accept_kw("recursive")
            while True:
                q.ctes.append(self.cte())
                if not self.at_punct(","):
                    break
                self.advance()
        q.cores.append(self.select_core())
        while self.at_kw("union", "intersect", "except"):
            if self.advance().text == "union":
                self.accept_kw("all")
            q.cores.append(self.select_core())
        tail_target = q.cores[0] if len(q.cores) == 1 else q.tail
        self.ctx.append(tail_target)
        try:
            if self.accept_kw("order"):
                self.expect_kw("by")
                self.ordering_terms()
            if self.accept_kw("limit"):
                self.expr()
                if self.accept_kw("offset") or self.at_punct(","):
                    if self.at_punct(","):
                        self.advance()
                    self.expr()
        finally:
            self.ctx.pop()
        return q

    def cte(self) -> Cte:
        name = self.name().text
        cols = []
        if self.at_punct("("):
            self.advance()
            cols.append(self.name().text)
            while self.at_punct(","):
                self.advance()
                cols.append(self.name().text)
            self.expect_punct(")")
        self.expect_kw("as")
        if self.accept_kw("not"):
            self.expect_kw("materialized")
        else:
            self.accept_kw("materialized")
        self.expect_punct("(")
        body = self.query()
        self.expect_punct(")")
        return Cte(name, cols, body)

    def select_core(self) -> SelectCore:
        core = SelectCore()
        self.ctx.append(core)
        try:
            if self.accept_kw("values"):
                while True:
                    self.expect_punct("(")
                    self.expr_list()
                    self.expect_punct(")")
                    if not self.at_punct(","):
                        break
                    self.advance()
                return core
            self.expect_kw("select")
            if not self.accept_kw("distinct"):
                self.accept_kw("all")
            self.result_column()
            while self.at_punct(","):
                self.advance()
                self.result_column()
            if self.accept_kw("from"):
                self.join_clause(core.sources)
            if self.accept_kw("where"):
                self.expr()
            if self.accept_kw("group"):
                self.expect_kw("by")
                self.expr_list()
            if self.accept_kw("having"):
                self.expr()
            if self.accept_kw("window"):
                while True:
                    self.name()
                    self.expect_kw("as")
                    self.window_spec()
                    if not self.at_punct(","):
                        break
                    self.advance()
            return core
        finally:
            self.ctx.pop()

    def result_column(self) -> None:
        if self.at_op("*"):
            self.advance()
            self.core.stars.append(None)
            return
        if self.is_name() and self.at_punct(".", 1) and self._is_star(2):
            qual = self.advance().text
            self.pos += 2
            self.core.stars.append(qual)
            return
        ref = self.expr()
        alias = None
        if self.accept_kw("as"):
            t = self.peek()
            if t is not None and t.kind == LITERAL and t.text.startswith("'"):
                alias = self.advance().text.strip("'").lower()
            else:
                alias = self.name().text
        elif self.is_name(allow_fallback=False) or (
            self.peek() is not None and self.peek().kind == LITERAL and self.peek().text.startswith("'")
        ):
            t = self.advance()
            alias = t.text.strip("'").lower() if t.kind == LITERAL else t.text
        if alias is not None:
            self.core.output_aliases.add(alias)
        name = alias if alias is not None else (ref.name if isinstance(ref, ColumnRef) else None)
        self.core.outputs.append((name, ref if isinstance(ref, ColumnRef) else None))

    def _is_star(self, offset: int) -> bool:
        t = self.peek(offset)
        return t is not None and t.kind == OPERATOR and t.text == "*"

    # -- FROM ----------------------------------------------------------
    def join_clause(self, sources: list) -> None:
        sources.append(self.table_or_subquery(sources))
        while True:
            if self.at_punct(","):
                self.advance()
            elif self.at_kw("join", "inner", "left", "right", "full", "cross", "natural"):
                self.accept_kw("natural")
                if self.accept_kw("left", "right", "full"):
                    self.accept_kw("outer")
                else:
                    self.accept_kw("inner", "cross")
                self.expect_kw("join")
            else:
                return
            left = list(sources)
            right = self.table_or_subquery(sources)
            sources.append(right)
            if self.accept_kw("on"):
                self.expr()
            elif self.accept_kw("using"):
                self.expect_punct("(")
                while True:
                    self.core.using.append(UsingRef(self.name().text, left, right))
                    if not self.at_punct(","):
                        break
                    self.advance()
                self.expect_punct(")")

    def table_or_subquery(self, sources: list) -> Source:
        if self.at_punct("("):
            self.advance()
            if self.at_kw("select", "with", "values"):
                sub = self.query()
                self.expect_punct(")")
                return DerivedRef(sub, self.opt_alias())
            inner: list = []
            self.join_clause(inner)
            self.expect_punct(")")
            # parenthesized join: flatten into the enclosing scope
            sources.extend(inner[:-1])
            return inner[-1]
        name = self.name().text
        if self.at_punct(".") and self.is_name(1):
            self.advance()
            name = self.name().text
        if self.at_punct("("):
            # table-valued function, e.g. json_each(...)
            self.advance()
            if not self.at_punct(")"):
                self.expr_list()
            self.expect_punct(")")
            return DerivedRef(None, self.opt_alias())
        alias = self.opt_alias()
        if self.accept_kw("indexed"):
            self.expect_kw("by")
            self.name()
        elif self.at_kw("not") and self.at_kw("indexed", offset=1):
            self.pos += 2
        return TableRef(name, alias)

    def opt_alias(self) -> Optional[str]:
        if self.accept_kw("as"):
            return self.name().text
        t = self.peek()
        if t is not None and t.kind == IDENTIFIER:
            return self.advance().text
        return None

    # -- expressions ---------------------------------------------------
    def expr_list(self) -> None:
        self.expr()
        while self.at_punct(","):
            self.advance()
            self.expr()

    def ordering_terms(self) -> None:
        while True:
            self.expr()
            self.accept_kw("asc", "desc")
            if self.accept_kw("nulls"):
                if not self.accept_kw("first", "last"):
                    self.fail("expected FIRST or LAST")
            if not self.at_punct(","):
                return
            self.advance()

    def expr(self, min_prec: int = 1):
        """Parse an expression; returns the ColumnRef when it is a lone column."""
        left = self.prefix()
        while True:
            t = self.peek()
            if t is None:
                return left
            if t.kind == KEYWORD:
                w = t.text
                if w == "or" and min_prec <= 1:
                    self.advance()
                    self.expr(2)
                elif w == "and" and min_prec <= 2:
                    self.advance()
                    self.expr(3)
                elif min_prec > 4:
                    return left
                elif w == "not" and self.at_kw("in", "like", "glob", "regexp", "match", "between", "null", offset=1):
                    self.advance()
                    if self.accept_kw("null"):
                        pass
                    else:
                        self.predicate_tail()
                elif w in ("in", "like", "glob", "regexp", "match", "between"):
                    self.predicate_tail()
                elif w == "is":
                    self.advance()
                    self.accept_kw("not")
                    if self.accept_kw("distinct"):
                        self.expect_kw("from")
                    self.expr(5)
                elif w in ("isnull", "notnull"):
                    self.advance()
                else:
                    return left
                left = None
                continue
            if t.kind == OPERATOR and t.text in _COMPARE_OPS:
                prec = _COMPARE_OPS[t.text]
                if prec < min_prec:
                    return left
                self.advance()
                self.expr(prec + 1)
                left = None
                continue
            return left

    def predicate_tail(self) -> None:
        w = self.advance().text
        if w == "in":
            if self.at_punct("("):
                self.advance()
                if self.at_kw("select", "with", "values"):
                    self.core.subqueries.append(self.query())
                elif not self.at_punct(")"):
                    self.expr_list()
                self.expect_punct(")")
            else:
                name = self.name().text
                if self.at_punct(".") and self.is_name(1):
                    self.advance()
                    name = self.name().text
                if self.at_punct("("):
                    self.advance()
                    if not self.at_punct(")"):
                        self.expr_list()
                    self.expect_punct(")")
                else:
                    self.core.in_tables.append(name)
        elif w == "between":
            self.expr(5)
            self.expect_kw("and")
            self.expr(5)
        else:
            self.expr(5)
            if self.accept_kw("escape"):
                self.expr(5)

    def prefix(self):
        t = self.peek()
        if t is None:
            self.fail("expected expression")
        if t.kind == KEYWORD and t.text == "not":
            self.advance()
            self.expr(3)
            return None
        if t.kind == OPERATOR and t.text in ("-", "+", "~"):
            self.advance()
            self.expr(_UNARY_PREC)
            return None
        ref = self.primary()
        while self.accept_kw("collate"):
            self.name()
            ref = None
        return ref

    def primary(self):
        t = self.peek()
        if t.kind == LITERAL:
            self.advance()
            return None
        if t.kind == OPERATOR and t.text == "?":
            self.advance()
            return None
        if t.kind == PUNCT and t.text == "(":
            self.advance()
            if self.at_kw("select", "with", "values"):
                self.core.subqueries.append(self.query())
                self.expect_punct(")")
                return None
            inner = self.expr()
            n = 1
            while self.at_punct(","):
                self.advance()
                self.expr()
                n += 1
            self.expect_punct(")")
            return inner if n == 1 else None
        if t.kind == KEYWORD:
            w = t.text
            if w in ("null", "true", "false", "current_date", "current_time", "current_timestamp"):
                self.advance()
                return None
            if w == "case":
                self.case_expr()
                return None
            if w == "cast":
                self.advance()
                self.expect_punct("(")
                self.expr()
                self.expect_kw("as")
                self.type_name()
                self.expect_punct(")")
                return None
            if w == "exists":
                self.advance()
                self.expect_punct("(")
                self.core.subqueries.append(self.query())
                self.expect_punct(")")
                return None
            if w == "raise":
                self.advance()
                self.expect_punct("(")
                while not self.at_punct(")"):
                    self.advance()
                self.advance()
                return None
            if w not in FALLBACK_KEYWORDS and not self.at_punct("(", 1):
                self.fail("unexpected keyword")
        if t.kind not in (IDENTIFIER, KEYWORD):
            self.fail("expected expression")
        tok = self.advance()
        if self.at_punct("("):
            self.function_call()
            return None
        if self.at_punct(".") and self.is_name(1):
            self.advance()
            col = self.advance()
            if self.at_punct(".") and self.is_name(1):
                # schema.table.column
                self.advance()
                tab, col = col, self.advance()
                ref = ColumnRef(tab.text, col.text)
            else:
                ref = ColumnRef(tok.text, col.text)
        else:
            ref = ColumnRef(None, tok.text, quoted=tok.quote == '"')
        self.core.refs.append(ref)
        return ref

    def function_call(self) -> None:
        self.expect_punct("(")
        if self.at_op("*"):
            self.advance()
        elif not self.at_punct(")"):
            self.accept_kw("distinct")
            self.expr_list()
            if self.accept_kw("order"):
                self.expect_kw("by")
                self.ordering_terms()
        self.expect_punct(")")
        if self.accept_kw("filter"):
            self.expect_punct("(")
            self.expect_kw("where")
            self.expr()
            self.expect_punct(")")
        if self.accept_kw("over"):
            if self.at_punct("("):
                self.window_spec()
            else:
                self.name()

    def window_spec(self) -> None:
        self.expect_punct("(")
        if self.is_name(allow_fallback=False):
            self.advance()
        if self.accept_kw("partition"):
            self.expect_kw("by")
            self.expr_list()
        if self.accept_kw("order"):
            self.expect_kw("by")
            self.ordering_terms()
        if self.at_kw("range", "rows", "groups"):
            depth = 0
            while True:
                t = self.advance()
                if t.kind == PUNCT and t.text == "(":
                    depth += 1
                elif t.kind == PUNCT and t.text == ")":
                    if depth == 0:
                        self.pos -= 1
                        break
                    depth -= 1
        self.expect_punct(")")

    def case_expr(self) -> None:
        self.expect_kw("case")
        if not self.at_kw("when"):
            self.expr()
        if not self.at_kw("when"):
            self.fail("expected WHEN")
        while self.accept_kw("when"):
            self.expr()
            self.expect_kw("then")
            self.expr()
        if self.accept_kw("else"):
            self.expr()
        self.expect_kw("end")

    def type_name(self) -> None:
        if not self.is_name():
            self.fail("expected type name")
        while self.is_name():
            self.advance()
        if self.at_punct("("):
            self.advance()
            self.signed_number()
            if self.at_punct(","):
                self.advance()
                self.signed_number()
            self.expect_punct(")")

    def signed_number(self) -> None:
        if self.at_op("+", "-"):
            self.advance()
        t = self.advance()
        if t.kind != LITERAL:
            self.pos -= 1
            self.fail("expected number")

    # -- DML -----------------------------------------------------------
    def _dml_core(self) -> tuple[Query, SelectCore]:
        core = SelectCore()
        return Query(cores=[core]), core

    def insert(self) -> Query:
        q, core = self._dml_core()
        self.ctx.append(core)
        try:
            if self.advance().text == "insert" and self.accept_kw("or"):
                self.advance()
            self.expect_kw("into")
            core.sources.append(TableRef(self.name().text))
            if self.accept_kw("as"):
                core.sources[0].alias = self.name().text
            if self.at_punct("("):
                self.advance()
                while True:
                    core.refs.append(ColumnRef(None, self.name().text))
                    if not self.at_punct(","):
                        break
                    self.advance()
                self.expect_punct(")")
            if self.accept_kw("default"):
                self.expect_kw("values")
            elif self.at_kw("select", "with", "values"):
                core.subqueries.append(self.query())
            else:
                self.fail("expected VALUES or SELECT")
        finally:
            self.ctx.pop()
        return q

    def update(self) -> Query:
        q, core = self._dml_core()
        self.ctx.append(core)
        try:
            self.expect_kw("update")
            if self.accept_kw("or"):
                self.advance()
            core.sources.append(TableRef(self.name().text, None))
            if self.accept_kw("as"):
                core.sources[0].alias = self.name().text
            self.expect_kw("set")
            while True:
                core.refs.append(ColumnRef(None, self.name().text))
                if self.at_op("="):
                    self.advance()
                else:
                    self.fail("expected '='")
                self.expr()
                if not self.at_punct(","):
                    break
                self.advance()
            if self.accept_kw("from"):
                self.join_clause(core.sources)
            if self.accept_kw("where"):
                self.expr()
        finally:
            self.ctx.pop()
        return q

    def delete(self) -> Query:
        q, core = self._dml_core()
        self.ctx.append(core)
        try:
            self.expect_kw("delete")
            self.expect_kw("from")
            core.sources.append(TableRef(self.name().text, None))
            if self.accept_kw("as"):
                core.sources[0].alias = self.name().text
            if self.accept_kw("where"):
                self.expr()
        finally:
            self.ctx.pop()
        return q


def parse(sql: str) -> Query:
    """Parse one statement. Raises SqlParseError on anything unsupported."""
    tokens = tokenize(sql)
    if not tokens:
        raise SqlParseError("empty statement")
    return _Parser(tokens).statement()
