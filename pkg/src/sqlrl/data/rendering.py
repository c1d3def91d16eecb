"""Schema rendering and generation-prompt construction."""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass
from typing import Optional

from ..analysis import SchemaCatalog, SchemaItemSet, extract_schema_items
from ..execution import DatabaseHandle, connect_readonly
from ..prompts import ADMIN_INSTRUCTIONS, GENERATION_TEMPLATE, fill
from .dataset import DatasetError, DatasetExample

DEFAULT_EXAMPLES_PER_COLUMN = 3
_MAX_VALUE_CHARS = 80


@dataclass(frozen=True)
class SchemaRendering:
    ddl_text: str


def _quote(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _example_values(conn: sqlite3.Connection, table: str, column: str, k: int) -> list:
    sql = f"SELECT {_quote(column)} FROM {_quote(table)}"
    try:
        cur = conn.execute(sql + " ORDER BY rowid")
    except sqlite3.OperationalError:  # WITHOUT ROWID tables
        cur = conn.execute(sql)
    seen = []
    for (value,) in cur:
        if value not in seen:
            seen.append(value)
            if len(seen) == k:
                break
    return seen


def _format_value(v) -> str:
    if isinstance(v, str) and len(v) > _MAX_VALUE_CHARS:
        v = v[:_MAX_VALUE_CHARS] + "..."
    return repr((v,))


def _wanted_columns(table: str, include: SchemaItemSet, all_cols: list[str], keys: set) -> list[str]:
    named = {i.split(".", 1)[1] for i in include.items if i.startswith(table + ".")}
    loose = {i.split(".", 1)[1] for i in include.items if i.startswith("?.")}
    wanted = named | (loose & {c.lower() for c in all_cols})
    if not named:
        # table listed on its own: show it whole
        return all_cols
    return [c for c in all_cols if c.lower() in wanted or c.lower() in keys]


def render_schema(db: DatabaseHandle, include: Optional[SchemaItemSet] = None,
                  examples_per_column: int = DEFAULT_EXAMPLES_PER_COLUMN) -> SchemaRendering:
    """CREATE TABLE text with ``-- Example Values`` comments (first k distinct values by rowid)."""
    conn = connect_readonly(db.path)
    try:
        tables = [r[0] for r in conn.execute(
            "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid"
        )]
        if include is not None:
            wanted_tables = {i.split(".", 1)[0] for i in include.items if not i.startswith("?.")}
            tables = [t for t in tables if t.lower() in wanted_tables]
        blocks = []
        for table in tables:
            info = conn.execute(f"PRAGMA table_info({_quote(table)})").fetchall()
            fks = conn.execute(f"PRAGMA foreign_key_list({_quote(table)})").fetchall()
            cols = [row[1] for row in info]
            pk_cols = [row[1] for row in sorted(info, key=lambda r: r[5]) if row[5]]
            keys = {c.lower() for c in pk_cols} | {fk[3].lower() for fk in fks}
            shown = cols if include is None else _wanted_columns(table.lower(), include, cols, keys)
            lines = []
            for cid, name, ctype, notnull, _default, pk in info:
                if name not in shown:
                    continue
                decl = f"{name} {ctype}".rstrip()
                if pk and len(pk_cols) == 1:
                    decl += " primary key"
                if notnull:
                    decl += " not null"
                values = _example_values(conn, table, name, examples_per_column)
                shown_vals = ", ".join(_format_value(v) for v in values)
                lines.append(f"        {decl}, -- Example Values: `{shown_vals}`")
            if len(pk_cols) > 1:
                lines.append(f"        primary key ({', '.join(pk_cols)}),")
            for fk in fks:
                if fk[3] in shown:
                    lines.append(f"        foreign key ({fk[3]}) references {fk[2]}({fk[4]}),")
            blocks.append(f"CREATE TABLE {table}\n(\n" + "\n".join(lines) + "\n);")
        return SchemaRendering("\n\n".join(blocks))
    finally:
        conn.close()


def union_with_gold_schema(filtered: SchemaItemSet, gold_sql: str, catalog: SchemaCatalog) -> SchemaItemSet:
    """Widen a (possibly empty) filtered schema with everything the gold query uses."""
    gold = extract_schema_items(gold_sql, catalog)
    if gold.parse_failed:
        raise DatasetError(f"gold query does not parse: {gold_sql!r}")
    return SchemaItemSet(filtered.items | gold.items)


def build_generation_prompt(example: DatasetExample, schema: SchemaRendering) -> str:
    return fill(GENERATION_TEMPLATE, {
        "ADMIN_INSTRUCTIONS": ADMIN_INSTRUCTIONS,
        "DATABASE_SCHEMA": schema.ddl_text,
        "QUESTION": example.question,
        "HINT": example.hint,
    })
