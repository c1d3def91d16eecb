"""Composite partial rewards, GRPO objective and evaluation tooling for text-to-SQL RL."""

from .grpo import CandidateGroup, GrpoConfig, group_advantages, grpo_objective, kl_k3
from .rewards import RewardScorer, RewardVector, RewardWeights, ScoringConfig, score_candidate

__version__ = "0.1.0"

__all__ = [
    "CandidateGroup", "GrpoConfig", "RewardScorer", "RewardVector", "RewardWeights",
    "ScoringConfig", "group_advantages", "grpo_objective", "kl_k3", "score_candidate",
]
