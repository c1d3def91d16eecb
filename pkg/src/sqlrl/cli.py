"""Command-line entry points: score, evaluate, simulate, judge, make-fixture.

Exit status is 0 on success, 1 on infrastructure or data errors (missing
files, unresolvable ids, judge transport failure) and 2 on bad arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import sqlite3
import sys
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

from .data import DatasetError, load_dataset
from .demo import build_fixture
from .evaluation import evaluate_predictions, load_predictions
from .execution import EVAL_TIMEOUT, REWARD_TIMEOUT
from .grpo import AGGREGATIONS, TOKEN_MEAN, GrpoConfig, group_advantages
from .judge import (
    HttpJudgeClient,
    JudgeClientConfig,
    JudgeRequest,
    JudgeTransportError,
    SimilarityJudge,
    judge_verdict,
)
from .rewards import RewardScorer, RewardWeights, ScoringConfig
from .simulation import TrainingDiverged, build_mutation_pools, simulate_training

log = logging.getLogger("sqlrl")

EXIT_OK, EXIT_INFRA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _weights(text: str) -> RewardWeights:
    try:
        return RewardWeights.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _judge(args):
    if getattr(args, "judge_endpoint", None):
        return HttpJudgeClient(JudgeClientConfig(endpoint=args.judge_endpoint, model=args.judge_model,
                                                 max_in_flight=max(1, args.workers)))
    return SimilarityJudge()


def _scorer(args, timeout: float) -> RewardScorer:
    cfg = ScoringConfig(db_root=Path(args.db_root), timeout=timeout, judge=_judge(args))
    return RewardScorer(cfg, args.weights)


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _read_rollouts(path) -> list:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                records.append((str(rec["question_id"]), rec["completion"], rec.get("group")))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad rollout record ({exc})") from exc
    return records


# -- commands ----------------------------------------------------------

def cmd_score(args) -> int:
    examples = {ex.question_id: ex for ex in load_dataset(args.dataset, args.flavor, args.db_root)}
    rollouts = _read_rollouts(args.rollouts)
    unknown = sorted({qid for qid, _, _ in rollouts if qid not in examples})
    if unknown:
        raise DatasetError(f"rollouts reference unknown question_id(s): {', '.join(unknown)}")
    scorer = _scorer(args, args.timeout or REWARD_TIMEOUT)
    try:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            vectors = list(pool.map(lambda r: scorer.score(examples[r[0]], r[1]), rollouts))
    finally:
        scorer.close()

    advantages = {}
    groups = defaultdict(list)
    for i, (qid, _, group) in enumerate(rollouts):
        if group is not None:
            groups[(qid, group)].append(i)
    for members in groups.values():
        if len(members) >= 2:
            adv = group_advantages([vectors[i].composite for i in members], args.std_normalize)
            advantages.update(zip(members, adv.tolist()))

    with _output(args.output) as out:
        for i, ((qid, _, group), vec) in enumerate(zip(rollouts, vectors)):
            rec = {"question_id": qid, **vec.to_json()}
            if group is not None:
                rec["group"] = group
            if i in advantages:
                rec["advantage"] = advantages[i]
            out.write(json.dumps(rec) + "\n")
    if vectors:
        mean = sum(v.composite for v in vectors) / len(vectors)
        exact = sum(v.r_exec for v in vectors) / len(vectors)
        print(f"scored {len(vectors)} rollouts: mean composite {mean:.4f}, exec rate {exact:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    examples = load_dataset(args.dataset, args.flavor, args.db_root)
    predictions = load_predictions(args.predictions)
    scorer = _scorer(args, args.timeout or EVAL_TIMEOUT)
    try:
        report = evaluate_predictions(examples, predictions, scorer, args.workers)
    finally:
        scorer.close()
    if args.output:
        with _output(args.output) as out:
            for res in report.examples:
                out.write(json.dumps(asdict(res)) + "\n")
            out.write(json.dumps({"summary": report.summary_json()}) + "\n")
    if args.json:
        print(json.dumps(report.summary_json()))
    else:
        print(report.table())
    return EXIT_OK


def cmd_simulate(args) -> int:
    examples = load_dataset(args.dataset, args.flavor, args.db_root)
    if args.limit is not None:
        examples = examples[:args.limit]
    try:
        cfg = GrpoConfig(epsilon=args.epsilon, beta=args.beta, group_size=args.group_size,
                         std_normalize=args.std_normalize, aggregation=args.aggregation)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    scorer = _scorer(args, args.timeout or REWARD_TIMEOUT)
    try:
        pools = build_mutation_pools(examples, scorer, cfg.group_size, seed=args.seed)
    finally:
        scorer.close()
    if not pools:
        raise DatasetError("no example produced a full candidate pool")
    trace = simulate_training(pools, args.steps, cfg, args.weights, lr=args.lr, seed=args.seed,
                              updates_per_step=args.updates_per_step,
                              max_grad_norm=args.max_grad_norm or None)
    if args.trace_out:
        trace.write_jsonl(args.trace_out)
    final = trace.final
    if final is None:
        print(f"pools: {len(pools)}  steps: 0")
    else:
        print(f"pools: {len(pools)}  steps: {len(trace)}  final mean reward: {final.mean_reward:.4f}  "
              f"P(correct): {final.p_correct:.4f}  KL: {final.kl:.4f}")
    return EXIT_OK


def cmd_judge(args) -> int:
    client = _judge(args)
    req = JudgeRequest(args.question, args.hint, args.gold, args.predicted)
    verdict = judge_verdict(req, client)
    print(json.dumps({"score": verdict.score, "raw": verdict.raw, "parse_failed": verdict.parse_failed}))
    return EXIT_OK


def cmd_make_fixture(args) -> int:
    dev = build_fixture(args.output, seed=args.seed)
    print(dev)
    return EXIT_OK


# -- parser ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqlrl", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p, need_db=True):
        p.add_argument("--dataset", required=True, help="BIRD/Spider-format JSON array")
        p.add_argument("--flavor", choices=("bird", "spider"), default="bird")
        p.add_argument("--db-root", required=need_db, help="directory holding <db_id>/<db_id>.sqlite")
        p.add_argument("--timeout", type=_positive_float, default=None, help="per-query seconds")
        p.add_argument("--workers", type=int, default=8)
        p.add_argument("--weights", type=_weights, default=RewardWeights(),
                       help="e.g. wexec=3,wjudge=2,wsyntax=1,wschema=1,wngram=1,wformat=1")
        judge_flags(p)

    def judge_flags(p):
        p.add_argument("--judge-endpoint", default=None,
                       help="chat-completion URL; bearer token read from $JUDGE_API_KEY (default: stub judge)")
        p.add_argument("--judge-model", default="judge")

    p = sub.add_parser("score", help="score a JSONL rollout file")
    data_flags(p)
    p.add_argument("--rollouts", required=True, help="JSONL with question_id, completion[, group]")
    p.add_argument("--output", default=None, help="JSONL output path (default: stdout)")
    p.add_argument("--std-normalize", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="execution accuracy and partial-reward means for predictions")
    data_flags(p)
    p.add_argument("--predictions", required=True, help="BIRD-style JSON object or JSONL")
    p.add_argument("--output", default=None, help="per-example JSONL report")
    p.add_argument("--json", action="store_true", help="print the summary as JSON instead of a table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="toy-policy GRPO run over mutation pools")
    data_flags(p)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--beta", type=float, default=0.04)
    p.add_argument("--group-size", type=int, default=6)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=None, help="use only the first N examples")
    p.add_argument("--updates-per-step", type=int, default=1)
    p.add_argument("--max-grad-norm", type=float, default=1.0,
                   help="cap on each per-example gradient norm; 0 disables")
    p.add_argument("--std-normalize", action="store_true")
    p.add_argument("--aggregation", choices=AGGREGATIONS, default=TOKEN_MEAN)
    p.add_argument("--trace-out", default=None, help="JSONL trace path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("judge", help="send one judge request and print the normalized score")
    p.add_argument("--question", required=True)
    p.add_argument("--hint", default="")
    p.add_argument("--gold", required=True)
    p.add_argument("--predicted", required=True)
    p.add_argument("--workers", type=int, default=1)
    judge_flags(p)
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("make-fixture", help="write the demo databases and dev.json")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_make_fixture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad arguments
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    if getattr(args, "steps", 0) < 0:
        parser.error("--steps must be non-negative")
    if getattr(args, "lr", 0.0) < 0:
        parser.error("--lr must be non-negative")
    if getattr(args, "max_grad_norm", 0.0) < 0:
        parser.error("--max-grad-norm must be non-negative")
    if getattr(args, "updates_per_step", 1) < 1:
        parser.error("--updates-per-step must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sqlrl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, JudgeTransportError, TrainingDiverged, OSError, sqlite3.Error) as exc:
        print(f"sqlrl: {exc}", file=sys.stderr)
        return EXIT_INFRA


if __name__ == "__main__":
    raise SystemExit(main())
