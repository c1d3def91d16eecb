from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

from ..analysis import SchemaItemSet
from ..execution import DatabaseHandle

DIFFICULTIES = ("simple", "moderate", "challenging")


class DatasetError(ValueError):
    """Malformed dataset file, unresolvable database, or a gold query that fails."""


@dataclass(frozen=True)
class DatasetExample:
    question_id: str
    db_id: str
    question: str
    hint: str
    gold_sql: str
    difficulty: Optional[str] = None

    def to_json(self) -> dict:
        return asdict(self)


def _bird(rec: dict, idx: int) -> DatasetExample:
    return DatasetExample(
        question_id=str(rec.get("question_id", idx)),
        db_id=rec["db_id"],
        question=rec["question"],
        hint=rec.get("evidence") or "",
        gold_sql=rec["SQL"],
        difficulty=rec.get("difficulty"),
    )


def _spider(rec: dict, idx: int) -> DatasetExample:
    return DatasetExample(
        question_id=str(rec.get("question_id", idx)),
        db_id=rec["db_id"],
        question=rec["question"],
        hint="",
        gold_sql=rec["query"],
        difficulty=rec.get("difficulty"),
    )


_FLAVORS = {"bird": _bird, "spider": _spider}


def load_dataset(path, flavor: str = "bird", db_root=None) -> list[DatasetExample]:
    """Load a BIRD- or Spider-format JSON array.

    When ``db_root`` is given every ``db_id`` must resolve to
    ``<db_root>/<db_id>/<db_id>.sqlite``.
    """
    if flavor not in _FLAVORS:
        raise ValueError(f"unknown dataset flavor {flavor!r}; expected one of {sorted(_FLAVORS)}")
    try:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(records, list):
        raise DatasetError(f"{path}: expected a JSON array of records")
    convert = _FLAVORS[flavor]
    examples = []
    for idx, rec in enumerate(records):
        try:
            ex = convert(rec, idx)
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}: record {idx} is missing field {exc}") from exc
        if ex.difficulty is not None and ex.difficulty not in DIFFICULTIES:
            raise DatasetError(f"{path}: record {idx} has unknown difficulty {ex.difficulty!r}")
        examples.append(ex)
    if db_root is not None:
        resolve_databases(examples, db_root)
    return examples


def resolve_databases(examples: Iterable[DatasetExample], db_root) -> dict[str, DatabaseHandle]:
    handles = {}
    missing = set()
    for ex in examples:
        h = DatabaseHandle.from_root(db_root, ex.db_id)
        if h.path.is_file():
            handles[ex.db_id] = h
        else:
            missing.add(ex.db_id)
    if missing:
        raise DatasetError(f"no database file under {db_root} for db_id(s): {', '.join(sorted(missing))}")
    return handles


def load_filtered_schema(path) -> dict[str, SchemaItemSet]:
    """Sidecar JSON: ``{question_id: ["table", "table.column", ...]}``."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return {str(qid): SchemaItemSet.of(*items) for qid, items in raw.items()}
