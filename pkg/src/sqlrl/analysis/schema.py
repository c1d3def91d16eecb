"""Schema catalogs and extraction of the schema items a query touches."""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .parser import ColumnRef, DerivedRef, Query, SelectCore, SqlParseError, TableRef, parse

UNRESOLVED = "?"


@dataclass(frozen=True)
class SchemaCatalog:
    tables: frozenset
    columns: Mapping[str, frozenset]

    def __post_init__(self):
        for table in self.columns:
            if table not in self.tables:
                raise ValueError(f"column map refers to unknown table {table!r}")
        if any(not t for t in self.tables):
            raise ValueError("table names must be non-empty")

    @classmethod
    def from_dict(cls, tables: Mapping[str, list]) -> "SchemaCatalog":
        cols = {t.lower(): frozenset(c.lower() for c in cs) for t, cs in tables.items()}
        return cls(frozenset(cols), cols)

    @classmethod
    def from_database(cls, path) -> "SchemaCatalog":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"database file not found: {path}")
        conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
        try:
            names = [r[0] for r in conn.execute(
                "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%'"
            )]
            tables = {}
            for name in names:
                info = conn.execute(f'PRAGMA table_info("{name.replace(chr(34), chr(34) * 2)}")').fetchall()
                tables[name] = [row[1] for row in info]
        finally:
            conn.close()
        return cls.from_dict(tables)

    def has_column(self, table: str, column: str) -> bool:
        return column in self.columns.get(table, ())


@dataclass(frozen=True)
class SchemaItemSet:
    """Tables as "t", resolved columns as "t.c", unresolved columns as "?.c"."""

    items: frozenset = frozenset()
    parse_failed: bool = False

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __contains__(self, item):
        return item in self.items

    def union(self, other: "SchemaItemSet") -> "SchemaItemSet":
        return SchemaItemSet(self.items | other.items, self.parse_failed and other.parse_failed)

    @property
    def tables(self) -> frozenset:
        return frozenset(i for i in self.items if "." not in i)

    @classmethod
    def of(cls, *items: str) -> "SchemaItemSet":
        return cls(frozenset(i.lower() for i in items))


@dataclass
class _Derived:
    """Output columns a derived table (subquery or CTE) exposes."""

    named: dict = field(default_factory=dict)
    star_tables: list = field(default_factory=list)
    star_derived: list = field(default_factory=list)

    def lookup(self, column: str, catalog: SchemaCatalog, _seen=None) -> Optional[set]:
        """Items behind ``column``, or None when the column is not exposed."""
        if column in self.named:
            return self.named[column]
        seen = _seen if _seen is not None else set()
        if id(self) in seen:
            return None
        seen.add(id(self))
        found = False
        hits = set()
        for t in self.star_tables:
            if catalog.has_column(t, column):
                hits.add(f"{t}.{column}")
                found = True
        for d in self.star_derived:
            sub = d.lookup(column, catalog, seen)
            if sub is not None:
                hits |= sub
                found = True
        return hits if found else None


@dataclass
class _Bound:
    key: str
    table: Optional[str] = None  # base table in the catalog
    derived: Optional[_Derived] = None  # subquery / CTE
    # neither set: unknown table


class _Scope:
    def __init__(self, core: SelectCore, parent: Optional["_Scope"]):
        self.core = core
        self.parent = parent
        self.bound: list[_Bound] = []

    def chain(self):
        s = self
        while s is not None:
            yield s
            s = s.parent


class _Resolver:
    def __init__(self, catalog: SchemaCatalog):
        self.catalog = catalog
        self.items: set = set()

    def query(self, q: Query, outer: Optional[_Scope], ctes: dict,
              publish: Optional[_Derived] = None) -> _Derived:
        ctes = dict(ctes)
        for cte in q.ctes:
            # visible inside its own body for WITH RECURSIVE
            placeholder = _Derived({c: set() for c in cte.columns})
            ctes[cte.name] = placeholder
            out = self.query(cte.query, outer, ctes, publish=None if cte.columns else placeholder)
            if cte.columns:
                flat = list(out.named.values())
                placeholder.named = {c: (flat[i] if i < len(flat) else set())
                                     for i, c in enumerate(cte.columns)}
        outputs = None
        first_scope = None
        for core in q.cores:
            scope, out = self.core(core, outer, ctes)
            if outputs is None:
                outputs, first_scope = out, scope
                if publish is not None:
                    publish.named = out.named
                    publish.star_tables = out.star_tables
                    publish.star_derived = out.star_derived
        aliases = q.cores[0].output_aliases
        for ref in q.tail.refs:
            if ref.qualifier is None and ref.name in aliases:
                continue
            self.ref(ref, first_scope)
        for sub in q.tail.subqueries:
            self.query(sub, first_scope, ctes)
        return outputs

    def core(self, core: SelectCore, outer: Optional[_Scope], ctes: dict):
        scope = _Scope(core, outer)
        for src in core.sources:
            scope.bound.append(self.bind(src, outer, ctes))
        for name in core.in_tables:
            if name in self.catalog.tables:
                self.items.add(name)
        for ref in core.refs:
            self.ref(ref, scope)
        for u in core.using:
            for src in u.left + [u.right]:
                b = self._bound_for(scope, src)
                if b is not None and b.table and self.catalog.has_column(b.table, u.column):
                    self.items.add(f"{b.table}.{u.column}")
        for sub in core.subqueries:
            self.query(sub, scope, ctes)

        out = _Derived()
        for name, ref in core.outputs:
            if name is None:
                continue
            out.named.setdefault(name, self.ref_items(ref, scope) if ref is not None else set())
        for qual in core.stars:
            for b in scope.bound:
                if qual is not None and b.key != qual:
                    continue
                if b.table:
                    out.star_tables.append(b.table)
                elif b.derived:
                    out.star_derived.append(b.derived)
        return scope, out

    def bind(self, src, outer: Optional[_Scope], ctes: dict) -> _Bound:
        if isinstance(src, TableRef):
            key = src.alias or src.name
            if src.name in ctes:
                return _Bound(key, derived=ctes[src.name])
            if src.name in self.catalog.tables:
                self.items.add(src.name)
                return _Bound(key, table=src.name)
            return _Bound(key)
        assert isinstance(src, DerivedRef)
        derived = self.query(src.query, outer, ctes) if src.query is not None else _Derived()
        return _Bound(src.alias or "", derived=derived)

    def _bound_for(self, scope: _Scope, src) -> Optional[_Bound]:
        idx = next((i for i, s in enumerate(scope.core.sources) if s is src), None)
        return scope.bound[idx] if idx is not None else None

    def ref(self, ref: ColumnRef, scope: _Scope) -> None:
        self.items.update(self.ref_items(ref, scope))

    def ref_items(self, ref: ColumnRef, scope: _Scope) -> set:
        col = ref.name
        if ref.qualifier is not None:
            for s in scope.chain():
                for b in s.bound:
                    if b.key == ref.qualifier:
                        return self._through(b, col)
            if ref.qualifier in self.catalog.tables:
                return {f"{ref.qualifier}.{col}"}
            return {f"{UNRESOLVED}.{col}"}
        for s in scope.chain():
            hits = []
            for b in s.bound:
                if b.table and self.catalog.has_column(b.table, col):
                    hits.append(b)
                elif b.derived and b.derived.lookup(col, self.catalog) is not None:
                    hits.append(b)
            if len(hits) == 1:
                return self._through(hits[0], col)
            if len(hits) > 1:
                return {f"{UNRESOLVED}.{col}"}
        if col in scope.core.output_aliases:
            return set()
        if ref.quoted:
            return set()
        return {f"{UNRESOLVED}.{col}"}

    def _through(self, b: _Bound, col: str) -> set:
        if b.table:
            return {f"{b.table}.{col}"}
        if b.derived:
            return set(b.derived.lookup(col, self.catalog) or ())
        return {f"{UNRESOLVED}.{col}"}


def extract_schema_items(sql: str, catalog: SchemaCatalog) -> SchemaItemSet:
    """Tables and columns referenced by ``sql``, with aliases resolved.

    Unparseable input yields an empty set with ``parse_failed`` set.
    """
    try:
        tree = parse(sql)
    except SqlParseError:
        return SchemaItemSet(frozenset(), parse_failed=True)
    resolver = _Resolver(catalog)
    resolver.query(tree, None, {})
    return SchemaItemSet(frozenset(resolver.items))
