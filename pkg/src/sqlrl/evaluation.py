"""Corpus-level evaluation: execution accuracy plus syntax / schema / n-gram means."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .data import DIFFICULTIES, DatasetError, DatasetExample
from .rewards import RewardScorer

BIRD_SEPARATOR = "\t----- bird -----\t"


def load_predictions(path) -> dict:
    """Read predicted SQL keyed by question id.

    Accepts the BIRD submission format (a JSON object whose values look like
    ``"SQL\\t----- bird -----\\tdb_id"``) or JSON lines with ``question_id``
    and ``sql`` (or ``completion``) fields.
    """
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{") and not stripped.startswith('{"question_id"'):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError:
            raw = None
        if isinstance(raw, dict):
            return {str(k): str(v).split(BIRD_SEPARATOR, 1)[0] for k, v in raw.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            sql = rec["sql"] if "sql" in rec else rec["completion"]
            out[str(rec["question_id"])] = sql
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetError(f"{path}:{lineno}: bad prediction record ({exc})") from exc
    return out


@dataclass(frozen=True)
class ExampleResult:
    question_id: str
    difficulty: Optional[str]
    ex: float
    syntax: float
    schema: float
    ngram: float
    timed_out: bool = False


@dataclass
class EvaluationReport:
    ex: float  # percentage
    syntax: float
    schema: float
    ngram: float
    count: int
    by_difficulty: dict = field(default_factory=dict)  # difficulty -> (EX %, count)
    examples: list = field(default_factory=list)

    def summary_json(self) -> dict:
        d = asdict(self)
        d.pop("examples")
        return d

    def table(self) -> str:
        rows = [("metric", "value"), ("examples", str(self.count)), ("EX %", f"{self.ex:.2f}"),
                ("syntax", f"{self.syntax:.4f}"), ("schema jaccard", f"{self.schema:.4f}"),
                ("n-gram jaccard", f"{self.ngram:.4f}")]
        for diff, (ex, n) in self.by_difficulty.items():
            rows.append((f"EX % ({diff}, n={n})", f"{ex:.2f}"))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{a:<{width}}  {b}" for a, b in rows)


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def build_report(results: Sequence[ExampleResult]) -> EvaluationReport:
    by_diff = {}
    for diff in DIFFICULTIES:
        sub = [r.ex for r in results if r.difficulty == diff]
        if sub:
            by_diff[diff] = (100.0 * _mean(sub), len(sub))
    return EvaluationReport(
        ex=100.0 * _mean([r.ex for r in results]),
        syntax=_mean([r.syntax for r in results]),
        schema=_mean([r.schema for r in results]),
        ngram=_mean([r.ngram for r in results]),
        count=len(results),
        by_difficulty=by_diff,
        examples=list(results),
    )


def evaluate_predictions(examples: Sequence[DatasetExample], predictions: dict,
                         scorer: RewardScorer, workers: int = 1) -> EvaluationReport:
    """Score each example's prediction; a missing prediction counts as an empty query."""

    def one(ex: DatasetExample) -> ExampleResult:
        m = scorer.measure(ex, predictions.get(ex.question_id, ""))
        return ExampleResult(ex.question_id, ex.difficulty, m.r_exec, m.r_syntax, m.r_schema,
                             m.r_ngram, timed_out=m.outcome.__class__.__name__ == "Timeout")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, examples))
    return build_report(results)
