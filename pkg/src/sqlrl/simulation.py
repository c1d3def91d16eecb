"""Desk-scale GRPO: a softmax bandit over a fixed pool of candidate completions.

Each dataset example gets a pool of G completions (the formatted gold query
plus mutants). The toy policy is one logit per pool entry; sampling a
"completion" is drawing an index. Log-probabilities are single-token, so the
GRPO surrogate and its gradient come straight from :func:`grpo_objective`,
chained through d log p_j / d logits = onehot(j) - p.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .data import MUTATION_KINDS, DatasetExample, MutationSpec, mutate
from .grpo import CandidateGroup, GrpoConfig, grpo_objective, group_advantages
from .rewards import RewardScorer, RewardWeights, composite_reward, format_completion

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    """Raised when the objective or the logits stop being finite."""


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits)
    return z - np.log(np.sum(np.exp(z)))


@dataclass
class ToyPolicy:
    """One logit vector per example; all vectors share the pool size."""

    logits: np.ndarray  # shape (n_examples, pool_size)

    def __post_init__(self):
        self.logits = np.array(self.logits, dtype=np.float64, ndmin=2)
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("policy logits must be finite")

    @classmethod
    def uniform(cls, n_examples: int, pool_size: int) -> "ToyPolicy":
        return cls(np.zeros((n_examples, pool_size)))

    def log_probs(self, k: int) -> np.ndarray:
        return log_softmax(self.logits[k])

    def probs(self, k: int) -> np.ndarray:
        return np.exp(self.log_probs(k))

    def copy(self) -> "ToyPolicy":
        return ToyPolicy(self.logits.copy())


def policy_objective(logits, old_logits, ref_logits, samples: Sequence[int],
                     advantages: Sequence[float], cfg: GrpoConfig):
    """GRPO objective for one group drawn from a softmax policy, with d J / d logits.

    ``samples`` are pool indices (one per group member). Returns ``(J, grad)``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    lp, lp_old, lp_ref = log_softmax(logits), log_softmax(np.asarray(old_logits, float)), \
        log_softmax(np.asarray(ref_logits, float))
    idx = np.asarray(samples, dtype=int)
    group = CandidateGroup(
        example_id="", completions=list(idx), rewards=np.zeros(len(idx)), advantages=advantages,
        logp_theta=[[lp[j]] for j in idx], logp_old=[[lp_old[j]] for j in idx],
        logp_ref=[[lp_ref[j]] for j in idx],
    )
    res = grpo_objective(group, cfg)
    p = np.exp(lp)
    grad = np.zeros_like(logits)
    for j, g in zip(idx, res.grad_logp):
        grad -= g[0] * p
        grad[j] += g[0]
    return res.value, grad


# -- candidate pools -------------------------------------------------------

@dataclass
class CandidatePool:
    example: DatasetExample
    completions: list
    vectors: list  # RewardVector per completion

    @property
    def correct(self) -> np.ndarray:
        return np.array([v.r_exec == 1.0 for v in self.vectors])

    def rewards(self, weights: RewardWeights) -> np.ndarray:
        return np.array([composite_reward(v.components, weights) for v in self.vectors])


def mutant_completions(example: DatasetExample, catalog, limit: int, seed: int = 0,
                       max_seeds: int = 8) -> list:
    """Distinct format-valid mutants of the gold query, cycling through mutation kinds."""
    out, seen = [], {example.gold_sql.strip()}
    for s in range(max_seeds):
        for kind in MUTATION_KINDS:
            sql = mutate(example.gold_sql, MutationSpec(kind, seed * 1000 + s), catalog)
            if sql is None or sql.strip() in seen:
                continue
            seen.add(sql.strip())
            out.append(format_completion(sql))
            if len(out) == limit:
                return out
    return out


def build_mutation_pools(examples: Iterable[DatasetExample], scorer: RewardScorer,
                         group_size: int = 6, seed: int = 0) -> list:
    """One pool per example: the gold completion first, then incorrect mutants.

    Examples that do not yield ``group_size - 1`` incorrect mutants are skipped
    with a warning; mutants that happen to be execution-equivalent to the gold
    query are discarded so the pool has exactly one correct entry.
    """
    pools = []
    for ex in examples:
        gold = format_completion(ex.gold_sql)
        completions, vectors = [gold], [scorer.score(ex, gold)]
        for cand in mutant_completions(ex, scorer.catalog(ex.db_id), limit=4 * group_size, seed=seed):
            vec = scorer.score(ex, cand)
            if vec.r_exec == 1.0:
                continue
            completions.append(cand)
            vectors.append(vec)
            if len(completions) == group_size:
                break
        if len(completions) < group_size:
            log.warning("skipping %s: only %d incorrect mutants", ex.question_id, len(completions) - 1)
            continue
        pools.append(CandidatePool(ex, completions, vectors))
    return pools


# -- training loop ---------------------------------------------------------

@dataclass
class StepRecord:
    step: int
    mean_reward: float  # expected composite under the current policy, averaged over pools
    p_correct: float  # probability mass on correct candidates, averaged over pools
    kl: float  # exact KL(policy || reference), averaged over pools
    objective: float  # GRPO objective of the last update, averaged over pools
    sample_reward: float  # mean composite of the sampled groups


@dataclass
class TrainingTrace:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> Optional[StepRecord]:
        return self.records[-1] if self.records else None

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(asdict(rec)) + "\n")


def exact_kl(logits: np.ndarray, ref_logits: np.ndarray) -> float:
    lp, lq = log_softmax(logits), log_softmax(ref_logits)
    return float(np.sum(np.exp(lp) * (lp - lq)))


def policy_summary(policy: ToyPolicy, ref: ToyPolicy, rewards: list, correct: list):
    """Expected reward, P(correct) and KL to the reference, averaged over pools."""
    n = len(rewards)
    er = sum(float(policy.probs(k) @ rewards[k]) for k in range(n)) / n
    pc = sum(float(policy.probs(k)[correct[k]].sum()) for k in range(n)) / n
    kl = sum(exact_kl(policy.logits[k], ref.logits[k]) for k in range(n)) / n
    return er, pc, kl


def simulate_training(pools: Sequence[CandidatePool], steps: int, cfg: GrpoConfig,
                      weights: RewardWeights, lr: float = 0.1, seed: int = 0,
                      updates_per_step: int = 1, policy: Optional[ToyPolicy] = None,
                      max_grad_norm: Optional[float] = 1.0) -> TrainingTrace:
    """Sample, score, compute advantages and take gradient-ascent steps on the GRPO objective.

    The old-policy snapshot is refreshed at the start of every step; with
    ``updates_per_step > 1`` the later updates see ratios away from 1 and the
    clipping becomes active. The reference policy is the initial policy.

    Each per-pool gradient is rescaled to at most ``max_grad_norm`` (``None``
    disables this). Without the cap a large ``beta`` makes the KL pull
    overshoot the reference instead of settling on it.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if max_grad_norm is not None and max_grad_norm <= 0:
        raise ValueError("max_grad_norm must be positive or None")
    if not pools:
        raise ValueError("no candidate pools to train on")
    sizes = {len(p.completions) for p in pools}
    if len(sizes) != 1:
        raise ValueError(f"pools must share one size, got {sorted(sizes)}")
    n, size = len(pools), sizes.pop()
    rng = np.random.default_rng(seed)
    policy = policy.copy() if policy is not None else ToyPolicy.uniform(n, size)
    ref = policy.copy()
    rewards = [p.rewards(weights) for p in pools]
    correct = [p.correct for p in pools]
    trace = TrainingTrace()
    for step in range(1, steps + 1):
        old = policy.copy()
        objective, sampled = 0.0, 0.0
        for k in range(n):
            samples = rng.choice(size, size=cfg.group_size, p=old.probs(k))
            r = rewards[k][samples]
            adv = group_advantages(r, cfg.std_normalize)
            sampled += float(r.mean())
            for _ in range(updates_per_step):
                value, grad = policy_objective(policy.logits[k], old.logits[k], ref.logits[k],
                                               samples, adv, cfg)
                norm = float(np.linalg.norm(grad))
                if max_grad_norm is not None and norm > max_grad_norm:
                    grad = grad * (max_grad_norm / norm)
                policy.logits[k] += lr * grad
            objective += value
        if not (np.isfinite(objective) and np.all(np.isfinite(policy.logits))):
            raise TrainingDiverged(f"training diverged at step {step}")
        er, pc, kl = policy_summary(policy, ref, rewards, correct)
        trace.records.append(StepRecord(step, er, pc, kl, objective / n, sampled / n))
    return trace


def sparse_signal_advantages(pools: Sequence[CandidatePool], weights: RewardWeights) -> list:
    """Advantages over each pool's incorrect candidates only.

    Under an execution-only weighting every such group is flat (all zeros);
    dense partial rewards still separate the candidates.
    """
    out = []
    for pool in pools:
        wrong = ~pool.correct
        if wrong.sum() >= 2:
            out.append(group_advantages(pool.rewards(weights)[wrong]))
    return out
