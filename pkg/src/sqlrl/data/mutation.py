"""Structured corruptions of gold SQL, used to build graded-quality candidates.

Edits are made on the original text (via token spans) so untouched parts of
the query keep their formatting. Every mutator returns ``None`` when it does
not apply to the query.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from ..analysis import IDENTIFIER, KEYWORD, LITERAL, PUNCT, SchemaCatalog, Token, extract_schema_items, tokenize

KINDS = ("drop_predicate", "swap_column", "wrong_table", "break_syntax", "change_literal", "drop_distinct")

_CLAUSE_END = {"group", "order", "limit", "having", "window", "union", "intersect", "except"}
_TABLE_INTRO = {"from", "join"}


@dataclass(frozen=True)
class MutationSpec:
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown mutation kind {self.kind!r}")


def _splice(sql: str, start: int, end: int, text: str = "") -> str:
    left, right = sql[:start], sql[end:]
    if not text:
        left = left.rstrip()
        right = right.lstrip()
        if left and right and not right.startswith((")", ",", ";")):
            return left + " " + right
        return left + right
    return left + text + right


def _depths(tokens: list[Token]) -> list[int]:
    out, d = [], 0
    for t in tokens:
        if t.kind == PUNCT and t.text == ")":
            d -= 1
        out.append(d)
        if t.kind == PUNCT and t.text == "(":
            d += 1
    return out


def _where_conjuncts(tokens: list[Token]):
    """Yield (clause_span, conjunct_spans) per WHERE clause; spans are token index ranges."""
    depth = _depths(tokens)
    for i, t in enumerate(tokens):
        if not (t.kind == KEYWORD and t.text == "where"):
            continue
        d = depth[i]
        j = i + 1
        parts, start, pending_between = [], j, False
        while j < len(tokens):
            u = tokens[j]
            if depth[j] < d or (depth[j] == d and (
                    (u.kind == KEYWORD and u.text in _CLAUSE_END) or (u.kind == PUNCT and u.text == ";"))):
                break
            if depth[j] == d and u.kind == KEYWORD:
                if u.text == "between":
                    pending_between = True
                elif u.text == "and":
                    if pending_between:
                        pending_between = False
                    else:
                        parts.append((start, j))
                        start = j + 1
                elif u.text == "or":
                    # top-level OR: treat the whole clause as one predicate
                    parts, start = [], i + 1
                    while j < len(tokens) and not (depth[j] < d or (depth[j] == d and (
                            (tokens[j].kind == KEYWORD and tokens[j].text in _CLAUSE_END)
                            or (tokens[j].kind == PUNCT and tokens[j].text == ";")))):
                        j += 1
                    break
            j += 1
        parts.append((start, j))
        yield (i, j), parts


def drop_predicate(sql: str, rng: random.Random, catalog: SchemaCatalog) -> Optional[str]:
    tokens = tokenize(sql)
    options = []
    for (w_start, w_end), parts in _where_conjuncts(tokens):
        for k in range(len(parts)):
            options.append((w_start, w_end, parts, k))
    if not options:
        return None
    w_start, w_end, parts, k = rng.choice(options)
    if len(parts) == 1:
        a, b = tokens[w_start].start, tokens[w_end - 1].end
    elif k == 0:
        a, b = tokens[parts[0][0]].start, tokens[parts[1][0]].start  # conjunct + following AND
        return sql[:a] + sql[b:]
    else:
        a, b = tokens[parts[k - 1][1]].start, tokens[parts[k][1] - 1].end  # preceding AND + conjunct
    return _splice(sql, a, b)


def _alias_map(tokens: list[Token], catalog: SchemaCatalog) -> dict:
    aliases = {}
    for i, t in enumerate(tokens):
        if t.kind == KEYWORD and t.text in _TABLE_INTRO and i + 1 < len(tokens):
            name = tokens[i + 1]
            if name.kind != IDENTIFIER or name.text not in catalog.tables:
                continue
            aliases[name.text] = name.text
            j = i + 2
            if j < len(tokens) and tokens[j].kind == KEYWORD and tokens[j].text == "as":
                j += 1
            if j < len(tokens) and tokens[j].kind == IDENTIFIER:
                aliases[tokens[j].text] = name.text
    return aliases


def _column_sites(tokens: list[Token], catalog: SchemaCatalog):
    """(token index, owning table) for tokens that look like column references."""
    aliases = _alias_map(tokens, catalog)
    used_tables = set(aliases.values())
    sites = []
    for i, t in enumerate(tokens):
        if t.kind != IDENTIFIER:
            continue
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        prev = tokens[i - 1] if i else None
        if nxt is not None and nxt.kind == PUNCT and nxt.text in "(.":
            continue
        if prev is not None and prev.kind == KEYWORD and prev.text in _TABLE_INTRO | {"as"}:
            continue
        if prev is not None and prev.kind == IDENTIFIER:
            continue  # bare alias after a table name
        if prev is not None and prev.kind == PUNCT and prev.text == "." and i >= 2:
            table = aliases.get(tokens[i - 2].text)
            if table and catalog.has_column(table, t.text):
                sites.append((i, table))
            continue
        owners = [tb for tb in used_tables if catalog.has_column(tb, t.text)]
        if len(owners) == 1:
            sites.append((i, owners[0]))
    return sites


def swap_column(sql: str, rng: random.Random, catalog: SchemaCatalog) -> Optional[str]:
    tokens = tokenize(sql)
    gold = extract_schema_items(sql, catalog)
    used_cols = {i.split(".", 1)[1] for i in gold.items if "." in i}
    sites = _column_sites(tokens, catalog)
    rng.shuffle(sites)
    for idx, table in sites:
        siblings = sorted(c for c in catalog.columns[table] if c not in used_cols)
        if not siblings:
            continue
        new = rng.choice(siblings)
        tok = tokens[idx]
        out = _splice(sql, tok.start, tok.end, _render_ident(new))
        if not extract_schema_items(out, catalog).parse_failed:
            return out
    return None


def _render_ident(name: str) -> str:
    if name.isidentifier() and name.isascii():
        return name
    return '"' + name.replace('"', '""') + '"'


def wrong_table(sql: str, rng: random.Random, catalog: SchemaCatalog) -> Optional[str]:
    tokens = tokenize(sql)
    sites = [i + 1 for i, t in enumerate(tokens[:-1])
             if t.kind == KEYWORD and t.text in _TABLE_INTRO
             and tokens[i + 1].kind == IDENTIFIER and tokens[i + 1].text in catalog.tables]
    if not sites:
        return None
    used = {tokens[i].text for i in sites}
    others = sorted(catalog.tables - used)
    if not others:
        return None
    tok = tokens[rng.choice(sites)]
    return _splice(sql, tok.start, tok.end, _render_ident(rng.choice(others)))


def break_syntax(sql: str, rng: random.Random, catalog: SchemaCatalog) -> Optional[str]:
    tokens = tokenize(sql)
    if not tokens or tokens[0].kind != KEYWORD:
        return None
    tok = tokens[0]
    # a statement can never begin with an identifier, so this always fails to prepare
    return sql[:tok.end - 1] + sql[tok.end:]


def change_literal(sql: str, rng: random.Random, catalog: SchemaCatalog) -> Optional[str]:
    tokens = tokenize(sql)
    sites = [t for t in tokens if t.kind == LITERAL and not t.text[:1] in "xX"]
    if not sites:
        return None
    tok = rng.choice(sites)
    src = sql[tok.start:tok.end]
    if src.startswith("'"):
        if len(src) < 2 or not src.endswith("'"):
            return None
        new = src[:-1] + "_x'"
    else:
        try:
            new = str(int(src, 0) + 1)
        except ValueError:
            try:
                new = repr(float(src) + 1.0)
            except ValueError:
                return None
    return _splice(sql, tok.start, tok.end, new)


def drop_distinct(sql: str, rng: random.Random, catalog: SchemaCatalog) -> Optional[str]:
    sites = [t for t in tokenize(sql) if t.kind == KEYWORD and t.text == "distinct"]
    if not sites:
        return None
    tok = rng.choice(sites)
    return _splice(sql, tok.start, tok.end)


_MUTATORS = {
    "drop_predicate": drop_predicate,
    "swap_column": swap_column,
    "wrong_table": wrong_table,
    "break_syntax": break_syntax,
    "change_literal": change_literal,
    "drop_distinct": drop_distinct,
}


def mutate(gold_sql: str, spec: MutationSpec, catalog: SchemaCatalog) -> Optional[str]:
    """Apply one corruption deterministically for ``spec.seed``; ``None`` means not applicable."""
    out = _MUTATORS[spec.kind](gold_sql, random.Random(f"{spec.kind}:{spec.seed}"), catalog)
    if out is None or out.strip() == gold_sql.strip():
        return None
    return out
