"""Group-relative advantages and the clipped GRPO surrogate with a KL penalty."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TOKEN_MEAN = "token-mean"
SEQUENCE = "sequence"
AGGREGATIONS = (TOKEN_MEAN, SEQUENCE)
STD_EPS = 1e-8


@dataclass(frozen=True)
class GrpoConfig:
    epsilon: float = 0.2
    beta: float = 0.04
    group_size: int = 6
    std_normalize: bool = False
    aggregation: str = TOKEN_MEAN

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")


def group_advantages(rewards: Sequence[float], std_normalize: bool = False) -> np.ndarray:
    """Reward minus the group mean, optionally divided by (population std + 1e-8)."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("a group needs at least two rewards")
    adv = r - r.mean()
    if std_normalize:
        adv = adv / (r.std() + STD_EPS)
    return adv


def kl_k3(logp_theta, logp_ref):
    """Per-sample KL estimate rho - log(rho) - 1 with rho = p_ref / p_theta; always >= 0."""
    x = np.asarray(logp_ref, dtype=np.float64) - np.asarray(logp_theta, dtype=np.float64)
    # series form near zero: expm1(x) - x cancels to 0.0 once x^2 drops below ulp(x)
    small = np.abs(x) < 1e-4
    series = x * x * (0.5 + x * (1.0 / 6.0 + x / 24.0))
    out = np.where(small, series, np.expm1(x) - x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class CandidateGroup:
    example_id: str
    completions: list
    rewards: np.ndarray
    advantages: np.ndarray
    logp_theta: list  # per candidate: per-token log-probs under the current policy
    logp_old: list
    logp_ref: list

    def __post_init__(self):
        g = len(self.completions)
        if g < 2:
            raise ValueError("a group needs at least two candidates")
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.advantages = np.asarray(self.advantages, dtype=np.float64)
        for name in ("rewards", "advantages", "logp_theta", "logp_old", "logp_ref"):
            if len(getattr(self, name)) != g:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {g}")
        conv = lambda seqs: [np.atleast_1d(np.asarray(s, dtype=np.float64)) for s in seqs]
        self.logp_theta = conv(self.logp_theta)
        self.logp_old = conv(self.logp_old)
        self.logp_ref = conv(self.logp_ref)
        for i, (a, b, c) in enumerate(zip(self.logp_theta, self.logp_old, self.logp_ref)):
            if not a.shape == b.shape == c.shape or a.ndim != 1 or a.size == 0:
                raise ValueError(f"candidate {i}: log-prob sequences must be non-empty and equal length")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
                raise ValueError(f"candidate {i}: non-finite log-probabilities")
        if not np.all(np.isfinite(self.advantages)):
            raise ValueError("non-finite advantages")

    @classmethod
    def from_rewards(cls, example_id, completions, rewards, logp_theta, logp_old, logp_ref,
                     std_normalize: bool = False) -> "CandidateGroup":
        adv = group_advantages(rewards, std_normalize)
        return cls(example_id, list(completions), rewards, adv, logp_theta, logp_old, logp_ref)


@dataclass
class ObjectiveResult:
    value: float
    # dJ / d logp_theta[i][t], same shapes as group.logp_theta
    grad_logp: list = field(default_factory=list)
    kl: float = 0.0
    clip_fraction: float = 0.0


def _clipped_term(log_ratio, adv, eps):
    """min(r*A, clip(r)*A) and its derivative with respect to log r."""
    ratio = np.exp(log_ratio)
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    unclipped_obj = ratio * adv
    clipped_obj = clipped * adv
    term = np.minimum(unclipped_obj, clipped_obj)
    # gradient flows only through the unclipped branch when it is the one selected
    uses_unclipped = unclipped_obj <= clipped_obj
    dterm = np.where(uses_unclipped, ratio * adv, 0.0)
    was_clipped = (ratio != clipped) & ~uses_unclipped
    return term, dterm, was_clipped


def grpo_objective(group: CandidateGroup, cfg: GrpoConfig) -> ObjectiveResult:
    """Clipped surrogate minus beta * k3 KL, averaged over the group (to be maximized)."""
    g = len(group.completions)
    total, kl_total, clipped_count, token_count = 0.0, 0.0, 0, 0
    grads = []
    for lp, lp_old, lp_ref, adv in zip(group.logp_theta, group.logp_old, group.logp_ref, group.advantages):
        if cfg.aggregation == TOKEN_MEAN:
            t = lp.size
            term, dterm, clipped = _clipped_term(lp - lp_old, adv, cfg.epsilon)
            kl = kl_k3(lp, lp_ref)
            dkl = -np.expm1(lp_ref - lp)  # d k3 / d logp_theta = 1 - rho
            total += float(np.mean(term - cfg.beta * kl))
            kl_total += float(np.mean(kl))
            grads.append((dterm - cfg.beta * dkl) / (t * g))
            clipped_count += int(np.sum(clipped))
            token_count += t
        else:
            seq_lp, seq_ref = lp.sum(), lp_ref.sum()
            term, dterm, clipped = _clipped_term(seq_lp - lp_old.sum(), adv, cfg.epsilon)
            kl = kl_k3(seq_lp, seq_ref)
            dkl = -np.expm1(seq_ref - seq_lp)
            total += float(term) - cfg.beta * kl
            kl_total += kl
            grads.append(np.full(lp.shape, (float(dterm) - cfg.beta * dkl) / g))
            clipped_count += int(clipped)
            token_count += 1
    value = total / g
    if not np.isfinite(value):
        raise FloatingPointError("GRPO objective is not finite")
    return ObjectiveResult(value, grads, kl_total / g, clipped_count / max(token_count, 1))
