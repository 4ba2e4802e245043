"""Learned operator selection for the ALNS search."""

from .env import (
    OBSERVATION_FIELDS,
    ActionTriple,
    EnvState,
    EpisodeConfig,
    PRPEnv,
    RewardBreakdown,
    StepInfo,
    compute_reward,
    decode_action,
    encode_action,
    env_reset,
    env_step,
    fluctuates,
    observe,
    step_score,
)
from .policy import (
    CHECKPOINT_VERSION,
    LossTerms,
    PolicyParams,
    init_policy,
    load_policy,
    policy_forward,
    ppo_loss,
    save_policy,
)
from .ppo import PPOConfig, TrainResult, infer, train

__all__ = [
    "OBSERVATION_FIELDS", "ActionTriple", "EnvState", "EpisodeConfig", "PRPEnv", "RewardBreakdown",
    "StepInfo", "compute_reward", "decode_action", "encode_action", "env_reset", "env_step",
    "fluctuates", "observe", "step_score", "CHECKPOINT_VERSION", "LossTerms", "PolicyParams",
    "init_policy", "load_policy", "policy_forward", "ppo_loss", "save_policy", "PPOConfig",
    "TrainResult", "infer", "train",
]
