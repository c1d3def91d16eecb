"""Acceptance criteria, one check per criterion.

Each ``check_N`` returns ``(ok, detail)``. Under pytest the lines are echoed
in an "acceptance criteria" section at the end of the run; as a script
(``python3 -m tests.test_acceptance``) they are printed directly and the exit
status is the number of failing criteria.
"""

import json
import math
import sqlite3
import sys
import tempfile
import time
from contextlib import redirect_stderr, redirect_stdout
from dataclasses import dataclass
from io import StringIO
from pathlib import Path

import numpy as np
import pytest

from sqlrl.analysis import SchemaCatalog, extract_schema_items
from sqlrl.cli import main as cli_main
from sqlrl.data import MUTATION_KINDS, MutationSpec, load_dataset, mutate
from sqlrl.demo import build_fixture
from sqlrl.grpo import CandidateGroup, GrpoConfig, group_advantages, grpo_objective, kl_k3
from sqlrl.rewards import RewardScorer, RewardWeights, ScoringConfig, format_completion, reward_ngram, reward_schema
from sqlrl.simulation import build_mutation_pools, policy_objective, sparse_signal_advantages

from . import golden_inputs, oracles

GOLDEN = Path(__file__).parent / "golden"


@dataclass
class Context:
    root: Path
    dev: Path
    examples: list
    catalogs: dict

    @classmethod
    def build(cls, root) -> "Context":
        root = Path(root)
        dev = Path(build_fixture(root))
        examples = load_dataset(dev, "bird", db_root=root)
        catalogs = {db: SchemaCatalog.from_database(root / db / f"{db}.sqlite")
                    for db in {ex.db_id for ex in examples}}
        return cls(root, dev, examples, catalogs)

    def db_path(self, db_id: str) -> Path:
        return self.root / db_id / f"{db_id}.sqlite"

    def scorer(self) -> RewardScorer:
        return RewardScorer(ScoringConfig(db_root=self.root))

    def cli(self, *argv) -> tuple:
        """Run a subcommand on the fixture; a later ``--dataset`` in ``argv`` overrides it."""
        buf = StringIO()
        with redirect_stdout(buf), redirect_stderr(StringIO()):
            code = cli_main([argv[0], "--dataset", str(self.dev), "--db-root", str(self.root), *argv[1:]])
        return code, buf.getvalue()


def mutation_corpus(ctx: Context, per_gold: int = 30) -> dict:
    """Distinct first- and second-order mutants of every gold query, keyed by question id."""
    corpus = {}
    for ex in ctx.examples:
        cat = ctx.catalogs[ex.db_id]
        seen, out = {ex.gold_sql.strip()}, []

        def add(sql):
            if sql is not None and sql.strip() not in seen and len(out) < per_gold:
                seen.add(sql.strip())
                out.append(sql)

        for seed in range(8):
            for kind in MUTATION_KINDS:
                add(mutate(ex.gold_sql, MutationSpec(kind, seed), cat))
        for first in list(out):
            for seed in range(3):
                for kind in MUTATION_KINDS:
                    add(mutate(first, MutationSpec(kind, seed), cat))
        corpus[ex.question_id] = out
    return corpus


def authorizer_items(conn: sqlite3.Connection, sql: str):
    """Tables and table.column pairs SQLite reports reading while preparing ``sql``; None if it fails."""
    items = set()

    def record(action, table, column, *_):
        if action == sqlite3.SQLITE_READ:
            items.add(table.lower())
            if column:
                items.add(f"{table.lower()}.{column.lower()}")
        return sqlite3.SQLITE_OK

    conn.set_authorizer(record)
    try:
        conn.execute("EXPLAIN " + sql)
    except sqlite3.Error:
        return None
    finally:
        conn.set_authorizer(None)
    return items


# -- criteria ----------------------------------------------------------------

def check_1(ctx: Context):
    """Schema and n-gram Jaccard equal brute-force set oracles on at least 200 pairs."""
    start = time.perf_counter()
    corpus = mutation_corpus(ctx, per_gold=12)
    pairs = []
    for ex in ctx.examples:
        pairs += [(ex, cand) for cand in corpus[ex.question_id]]
        pairs += [(ex, other.gold_sql) for other in ctx.examples
                  if other.db_id == ex.db_id and other is not ex]
    conns = {db: sqlite3.connect(ctx.db_path(db)) for db in ctx.catalogs}
    schema_checked, worst = 0, 0.0
    for ex, cand in pairs:
        worst = max(worst, abs(reward_ngram(cand, ex.gold_sql)
                               - float(oracles.jaccard_exact(oracles.bigrams(oracles.lex(cand)),
                                                             oracles.bigrams(oracles.lex(ex.gold_sql))))))
        conn = conns[ex.db_id]
        cand_items, gold_items = authorizer_items(conn, cand), authorizer_items(conn, ex.gold_sql)
        if cand_items is None:
            continue  # SQLite cannot prepare it, so there is no oracle item set
        cat = ctx.catalogs[ex.db_id]
        mine = {str(i).lower() for i in extract_schema_items(cand, cat).items}
        expected = float(oracles.jaccard_exact(cand_items, gold_items))
        err = abs(reward_schema(cand, ex.gold_sql, cat) - expected)
        if mine != cand_items:
            err = math.inf
        worst = max(worst, err)
        schema_checked += 1
    for conn in conns.values():
        conn.close()
    elapsed = time.perf_counter() - start
    ok = len(pairs) >= 200 and schema_checked >= 200 and worst < 1e-12 and elapsed < 10
    return ok, (f"{len(pairs)} n-gram pairs, {schema_checked} schema pairs, max |diff| {worst:.1e}, "
                f"{elapsed:.2f}s")


def check_2(ctx: Context):
    """No format-valid incorrect candidate reaches the composite of a correct one."""
    start = time.perf_counter()
    corpus = mutation_corpus(ctx)
    scorer = ctx.scorer()
    n_mut, golds, violations, worst_gap = 0, 0, 0, math.inf
    try:
        for ex in ctx.examples:
            cands = corpus[ex.question_id]
            if not cands:
                continue
            golds += 1
            n_mut += len(cands)
            vecs = [scorer.score(ex, format_completion(sql)) for sql in [ex.gold_sql, *cands]]
            correct = [v.composite for v in vecs if v.r_exec == 1.0]
            wrong = [v.composite for v in vecs if v.r_exec != 1.0]
            if wrong:
                worst_gap = min(worst_gap, min(correct) - max(wrong))
                violations += sum(w >= min(correct) for w in wrong)
    finally:
        scorer.close()
    elapsed = time.perf_counter() - start
    ok = n_mut >= 500 and golds >= 20 and violations == 0 and elapsed < 60
    return ok, (f"{n_mut} mutants over {golds} golds, {violations} violations, "
                f"smallest correct-minus-incorrect gap {worst_gap:.3f}, {elapsed:.2f}s")


def check_3(ctx: Context):
    """Advantages mean-center and ignore a constant reward offset."""
    rng = np.random.default_rng(3)
    worst_mean, worst_shift = 0.0, 0.0
    for _ in range(1000):
        g = int(rng.integers(2, 9))
        r = rng.uniform(0, 9, g)
        c = float(rng.uniform(-1000, 1000))
        adv = group_advantages(r)
        worst_mean = max(worst_mean, abs(float(adv.mean())))
        worst_shift = max(worst_shift, float(np.max(np.abs(group_advantages(r + c) - adv))))
    ok = worst_mean < 1e-9 and worst_shift < 1e-9
    return ok, f"1000 groups, max |mean| {worst_mean:.1e}, max shift change {worst_shift:.1e}"


def check_4(ctx: Context):
    """J equals mean advantage at identical policies for every epsilon; k3 is a non-negative divergence."""
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(200):
        g = int(rng.integers(2, 9))
        adv = rng.normal(0, 2, g)
        lp = [rng.normal(-2, 1, int(rng.integers(1, 6))) for _ in range(g)]
        for agg in ("token-mean", "sequence"):
            group = CandidateGroup("x", list(range(g)), np.zeros(g), adv, lp, lp, lp)
            for eps in (0.05, 0.2, 0.5, 0.9):
                value = grpo_objective(group, GrpoConfig(epsilon=eps, beta=0.04, group_size=g,
                                                         aggregation=agg)).value
                worst = max(worst, abs(value - float(np.mean(adv))))
    a = rng.normal(0, 3, 100_000)
    b = np.where(rng.random(100_000) < 0.1, a, rng.normal(0, 3, 100_000))
    k = kl_k3(a, b)
    non_negative = bool(np.all(k >= 0))
    zero_iff_equal = bool(np.array_equal(k == 0, a == b))
    ok = worst < 1e-12 and non_negative and zero_iff_equal
    return ok, (f"max |J - mean(A)| {worst:.1e}; k3 over 1e5 samples: min {k.min():.1e}, "
                f"non-negative {non_negative}, zero exactly at equal log-probs {zero_iff_equal}")


def check_5(ctx: Context):
    """Analytic toy-policy gradients agree with central differences."""
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(100):
        k, g = int(rng.integers(2, 8)), int(rng.integers(2, 9))
        logits = rng.normal(0, 1, k)
        old = logits + rng.normal(0, 0.3, k)
        ref = rng.normal(0, 1, k)
        samples = rng.integers(0, k, g)
        adv = group_advantages(rng.uniform(0, 9, g), std_normalize=bool(i % 3 == 0))
        cfg = GrpoConfig(epsilon=float(rng.uniform(0.05, 0.5)), beta=float(rng.uniform(0, 1)), group_size=g,
                         aggregation=("token-mean", "sequence")[i % 2])
        _, grad = policy_objective(logits, old, ref, samples, adv, cfg)
        fd = oracles.central_difference(
            lambda x: policy_objective(np.array(x), old, ref, samples, adv, cfg)[0], logits.tolist(), h=1e-5)
        worst = max(worst, oracles.max_relative_error(grad.tolist(), fd))
    return worst < 1e-4, f"100 configurations, max relative error {worst:.1e}"


def check_6(ctx: Context):
    """Default simulation reaches P(correct) >= 0.9; exec-only reward gives no signal without a correct candidate."""
    start = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        trace_path = Path(tmp) / "trace.jsonl"
        code, _ = ctx.cli("simulate", "--trace-out", str(trace_path))
        rows = [json.loads(line) for line in trace_path.read_text().splitlines()] if code == 0 else []
    p_final = rows[-1]["p_correct"] if rows else float("nan")
    scorer = ctx.scorer()
    try:
        pools = build_mutation_pools(ctx.examples, scorer, group_size=6)
    finally:
        scorer.close()
    exec_only = RewardWeights(w_exec=3, w_judge=0, w_syntax=0, w_schema=0, w_ngram=0, w_format=0)
    flat = sparse_signal_advantages(pools, exec_only)
    dense = sparse_signal_advantages(pools, RewardWeights())
    all_flat = bool(flat) and all(np.all(a == 0.0) for a in flat)
    all_dense = bool(dense) and all(np.any(a != 0.0) for a in dense)
    elapsed = time.perf_counter() - start
    ok = code == 0 and len(rows) <= 500 and p_final >= 0.9 and all_flat and all_dense and elapsed < 120
    return ok, (f"P(correct) {p_final:.3f} after {len(rows)} steps; {len(flat)} all-incorrect groups: "
                f"exec-only all zero {all_flat}, full weights all nonzero {all_dense}; {elapsed:.1f}s")


def check_7(ctx: Context):
    """Gold predictions score EX 100 and syntax 1; syntax-broken predictions score 0 and 0."""
    results = []
    with tempfile.TemporaryDirectory() as tmp:
        for name, chosen in (("all", ctx.examples), ("odd", ctx.examples[1::2]), ("first5", ctx.examples[:5])):
            sliced = Path(tmp) / f"{name}.json"
            raw = json.loads(ctx.dev.read_text())
            keep = {ex.question_id for ex in chosen}
            sliced.write_text(json.dumps([r for r in raw if str(r["question_id"]) in keep]))
            for kind, pred in (("gold", lambda ex: ex.gold_sql),
                               ("broken", lambda ex: mutate(ex.gold_sql, MutationSpec("break_syntax"),
                                                            ctx.catalogs[ex.db_id]))):
                preds = Path(tmp) / f"{name}-{kind}.json"
                preds.write_text(json.dumps({ex.question_id: pred(ex) for ex in chosen}))
                code, out = ctx.cli("evaluate", "--dataset", str(sliced), "--predictions", str(preds), "--json")
                s = json.loads(out) if code == 0 else {"ex": None, "syntax": None}
                results.append((name, kind, s["ex"], s["syntax"]))
                results[-1] += ((s["ex"], s["syntax"]) == ((100.0, 1.0) if kind == "gold" else (0.0, 0.0)),)
    ok = all(r[-1] for r in results)
    detail = "; ".join(f"{n}/{k}: EX {e} syntax {s}" for n, k, e, s, _ in results)
    return ok, detail


def check_8(ctx: Context):
    """Judge and generation prompts are byte-identical to the frozen golden files."""
    judge = golden_inputs.judge_prompt().encode("utf-8")
    gen = golden_inputs.generation_prompt(ctx.root, ctx.examples[0]).encode("utf-8")
    judge_ok = judge == (GOLDEN / "judge_prompt.txt").read_bytes()
    gen_ok = gen == (GOLDEN / "generation_prompt.txt").read_bytes()
    rubric = b"Use STRFTIME() for any date manipulations" in judge
    return judge_ok and gen_ok and rubric, f"judge prompt {judge_ok}, generation prompt {gen_ok}, rubric line {rubric}"


def check_9(ctx: Context):
    """Batch scoring with 8 workers and the stub judge sustains at least 50 candidates per second."""
    corpus = mutation_corpus(ctx, per_gold=20)
    rows = []
    for ex in ctx.examples:
        for i, sql in enumerate([ex.gold_sql, *corpus[ex.question_id]]):
            rows.append({"question_id": ex.question_id, "completion": format_completion(sql), "group": i // 6})
    with tempfile.TemporaryDirectory() as tmp:
        rollouts, out = Path(tmp) / "rollouts.jsonl", Path(tmp) / "scored.jsonl"
        rollouts.write_text("".join(json.dumps(r) + "\n" for r in rows))
        start = time.perf_counter()
        code, _ = ctx.cli("score", "--rollouts", str(rollouts), "--output", str(out), "--workers", "8")
        elapsed = time.perf_counter() - start
        written = len(out.read_text().splitlines()) if code == 0 else 0
    rate = written / elapsed
    return code == 0 and written == len(rows) and rate >= 50, f"{written} candidates in {elapsed:.2f}s = {rate:.0f}/s"


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9]


def run_check(n: int, ctx: Context) -> tuple:
    try:
        ok, detail = CHECKS[n - 1](ctx)
    except Exception as exc:  # a crash is a failure, reported rather than hidden
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    return ok, f"criterion {n}: {'PASS' if ok else 'FAIL'}  {CHECKS[n - 1].__doc__.strip()}  [{detail}]"


@pytest.fixture(scope="module")
def ctx(tmp_path_factory):
    return Context.build(tmp_path_factory.mktemp("acceptance"))


@pytest.mark.parametrize("n", range(1, len(CHECKS) + 1))
def test_criterion(n, ctx):
    from . import conftest

    ok, line = run_check(n, ctx)
    conftest.ACCEPTANCE_LINES[n] = line
    assert ok, line


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        context = Context.build(tmp)
        failures = 0
        for n in range(1, len(CHECKS) + 1):
            ok, line = run_check(n, context)
            failures += not ok
            print(line, flush=True)
    sys.exit(failures)
