"""Partial rewards for text-to-SQL completions and their weighted composite."""

from __future__ import annotations

import math
import re
import threading
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .analysis import SchemaCatalog, extract_schema_items, jaccard, ngram_set, tokenize
from .data import DatasetError, DatasetExample
from .execution import REWARD_TIMEOUT, ConnectionPool, ExecutionOutcome, SqlError, Success, Timeout, results_match
from .judge import JudgeClient, JudgeRequest, SimilarityJudge, judge_verdict

COMPONENTS = ("exec", "judge", "syntax", "schema", "ngram", "format")


@dataclass(frozen=True)
class RewardWeights:
    w_exec: float = 3.0
    w_judge: float = 2.0
    w_syntax: float = 1.0
    w_schema: float = 1.0
    w_ngram: float = 1.0
    w_format: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{f.name} must be finite and non-negative, got {v}")

    @property
    def total(self) -> float:
        return sum(getattr(self, f.name) for f in fields(self))

    def scaled(self, factor: float) -> "RewardWeights":
        return RewardWeights(*(getattr(self, f.name) * factor for f in fields(self)))

    @classmethod
    def parse(cls, text: str) -> "RewardWeights":
        """Parse ``wexec=3,wjudge=2,...``; unspecified weights keep their defaults."""
        values = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, val = part.partition("=")
            if not sep:
                raise ValueError(f"bad weight spec {part!r}; expected name=value")
            key = key.strip().lower().replace("_", "")
            if key.startswith("w"):
                key = key[1:]
            if key not in COMPONENTS:
                raise ValueError(f"unknown weight {part!r}; expected one of {', '.join('w' + c for c in COMPONENTS)}")
            values[f"w_{key}"] = float(val)
        return cls(**values)


@dataclass(frozen=True)
class RewardVector:
    r_exec: float
    r_judge: float
    r_syntax: float
    r_schema: float
    r_ngram: float
    r_format: float
    composite: float
    parse_failed: bool = False
    timed_out: bool = False
    judge_skipped: bool = False
    judge_parse_failed: bool = False

    @classmethod
    def build(cls, weights: RewardWeights, **kw) -> "RewardVector":
        parts = [kw.get(f"r_{c}", 0.0) for c in COMPONENTS]
        for name, v in zip(COMPONENTS, parts):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"r_{name}={v} outside [0, 1]")
        composite = composite_reward(parts, weights)
        return cls(*parts, composite=composite,
                   **{k: v for k, v in kw.items() if not k.startswith("r_")})

    @property
    def components(self) -> tuple:
        return tuple(getattr(self, f"r_{c}") for c in COMPONENTS)

    def to_json(self) -> dict:
        return asdict(self)


def composite_reward(components, weights: RewardWeights) -> float:
    """Weighted sum in the fixed component order exec, judge, syntax, schema, ngram, format."""
    ws = (weights.w_exec, weights.w_judge, weights.w_syntax,
          weights.w_schema, weights.w_ngram, weights.w_format)
    total = 0.0
    for w, r in zip(ws, components):
        total += w * r
    return total


# -- completion format -------------------------------------------------

@dataclass(frozen=True)
class ExtractionResult:
    format_ok: bool
    sql: Optional[str]
    reasoning: Optional[str] = None


_CANONICAL = re.compile(
    r"\A\s*<reasoning>(?P<reasoning>.*?)</reasoning>\s*"
    r"<answer>\s*```sql[ \t]*\n?(?P<sql>.*?)```\s*</answer>\s*\Z",
    re.DOTALL,
)
_FENCE = re.compile(r"```sql[ \t]*\n?(.*?)```", re.DOTALL)
_TAGS = ("<reasoning>", "</reasoning>", "<answer>", "</answer>")


def extract_answer(completion: str) -> ExtractionResult:
    m = _CANONICAL.match(completion)
    if m and all(completion.count(tag) == 1 for tag in _TAGS) and completion.count("```sql") == 1:
        return ExtractionResult(True, m.group("sql").strip(), m.group("reasoning").strip())
    fences = _FENCE.findall(completion)
    if fences:
        return ExtractionResult(False, fences[-1].strip())
    return ExtractionResult(False, completion.strip())


def format_completion(sql: str, reasoning: str = "Identify the tables and columns, then write the query.") -> str:
    """Render an answer in the canonical reasoning/answer layout."""
    return f"<reasoning>\n{reasoning}\n</reasoning>\n<answer>\n```sql\n{sql}\n```\n</answer>"


# -- component rewards -------------------------------------------------

def reward_format(extraction: ExtractionResult) -> float:
    return 1.0 if extraction.format_ok else 0.0


def reward_execution(candidate: ExecutionOutcome, gold: ExecutionOutcome, order_sensitive: bool = False) -> float:
    if not isinstance(gold, Success):
        raise DatasetError(f"gold query did not execute: {gold}")
    if isinstance(candidate, Success) and results_match(candidate, gold, order_sensitive):
        return 1.0
    return 0.0


def reward_syntax(candidate: ExecutionOutcome) -> float:
    # timeouts cannot be confirmed error-free
    return 1.0 if isinstance(candidate, Success) else 0.0


def reward_schema(candidate_sql: str, gold_sql: str, catalog: SchemaCatalog) -> float:
    cand = extract_schema_items(candidate_sql, catalog)
    if cand.parse_failed:
        return 0.0
    gold = extract_schema_items(gold_sql, catalog)
    if gold.parse_failed:
        raise DatasetError(f"gold query does not parse: {gold_sql!r}")
    return jaccard(cand.items, gold.items)


def reward_ngram(candidate_sql: str, gold_sql: str, n: int = 2) -> float:
    return jaccard(ngram_set(tokenize(candidate_sql), n), ngram_set(tokenize(gold_sql), n))


# -- orchestration -----------------------------------------------------

@dataclass
class ScoringConfig:
    db_root: Optional[Path] = None
    timeout: float = REWARD_TIMEOUT
    ngram_n: int = 2
    order_sensitive: bool = False
    judge: Optional[JudgeClient] = None
    judge_parse_retries: int = 2


@dataclass(frozen=True)
class Measurement:
    outcome: ExecutionOutcome
    r_exec: float
    r_syntax: float
    r_schema: float
    r_ngram: float
    parse_failed: bool


@dataclass
class _GoldEntry:
    lock: threading.Lock = field(default_factory=threading.Lock)
    outcome: Optional[ExecutionOutcome] = None
    items: frozenset = frozenset()


class RewardScorer:
    """Scores completions for dataset examples; safe to share across threads.

    Gold results and schema catalogs are computed once per example / database.
    """

    def __init__(self, config: ScoringConfig, weights: Optional[RewardWeights] = None,
                 pool: Optional[ConnectionPool] = None):
        self.config = config
        self.weights = weights or RewardWeights()
        self.pool = pool or ConnectionPool(config.db_root)
        self.judge = config.judge if config.judge is not None else SimilarityJudge()
        self._lock = threading.Lock()
        self._gold: dict = {}
        self._catalogs: dict = {}

    def catalog(self, db_id: str) -> SchemaCatalog:
        with self._lock:
            cat = self._catalogs.get(db_id)
        if cat is None:
            cat = SchemaCatalog.from_database(self.pool.handle(db_id).path)
            with self._lock:
                cat = self._catalogs.setdefault(db_id, cat)
        return cat

    def _gold_entry(self, example: DatasetExample) -> _GoldEntry:
        key = (example.db_id, example.gold_sql)
        with self._lock:
            entry = self._gold.setdefault(key, _GoldEntry())
        with entry.lock:
            if entry.outcome is None:
                outcome = self.pool.execute(example.db_id, example.gold_sql, self.config.timeout)
                if not isinstance(outcome, Success):
                    raise DatasetError(f"gold query for {example.question_id} did not execute: {outcome}")
                gold_items = extract_schema_items(example.gold_sql, self.catalog(example.db_id))
                if gold_items.parse_failed:
                    raise DatasetError(f"gold query for {example.question_id} does not parse")
                entry.items = gold_items.items
                entry.outcome = outcome
        return entry

    def gold_outcome(self, example: DatasetExample) -> ExecutionOutcome:
        return self._gold_entry(example).outcome

    def measure(self, example: DatasetExample, sql: str) -> "Measurement":
        """Judge-free components for raw SQL: execution match, syntax, schema and n-gram overlap."""
        cfg = self.config
        gold = self._gold_entry(example)
        outcome = self.pool.execute(example.db_id, sql, cfg.timeout) if sql.strip() else SqlError("empty query")
        cand_items = extract_schema_items(sql, self.catalog(example.db_id))
        return Measurement(
            outcome=outcome,
            r_exec=reward_execution(outcome, gold.outcome, cfg.order_sensitive),
            r_syntax=reward_syntax(outcome),
            r_schema=0.0 if cand_items.parse_failed else jaccard(cand_items.items, gold.items),
            r_ngram=reward_ngram(sql, example.gold_sql, cfg.ngram_n),
            parse_failed=cand_items.parse_failed,
        )

    def score(self, example: DatasetExample, completion: str,
              weights: Optional[RewardWeights] = None) -> RewardVector:
        extraction = extract_answer(completion)
        sql = extraction.sql or ""
        m = self.measure(example, sql)
        if m.r_exec == 1.0:
            r_judge, skipped, judge_failed = 1.0, True, False
        else:
            verdict = judge_verdict(
                JudgeRequest(example.question, example.hint, example.gold_sql, sql),
                self.judge, self.config.judge_parse_retries)
            r_judge, skipped, judge_failed = verdict.score, False, verdict.parse_failed
        return RewardVector.build(
            weights or self.weights,
            r_exec=m.r_exec,
            r_judge=r_judge,
            r_syntax=m.r_syntax,
            r_schema=m.r_schema,
            r_ngram=m.r_ngram,
            r_format=reward_format(extraction),
            parse_failed=m.parse_failed,
            timed_out=isinstance(m.outcome, Timeout),
            judge_skipped=skipped,
            judge_parse_failed=judge_failed,
        )

    def close(self) -> None:
        self.pool.close()


def score_candidate(example: DatasetExample, completion: str,
                    weights: Optional[RewardWeights] = None,
                    config: Optional[ScoringConfig] = None,
                    scorer: Optional[RewardScorer] = None) -> RewardVector:
    """One-off scoring; pass ``scorer`` to reuse gold caches across calls."""
    if scorer is None:
        scorer = RewardScorer(config or ScoringConfig(), weights)
    return scorer.score(example, completion, weights)
