"""Proximal policy optimisation for the operator-selection agent, plus inference."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..alns import DESTROY_OPERATORS, REPAIR_OPERATORS, SearchStats
from ..exceptions import TrainingError
from ..model import Instance, Solution
from ..validation import check_rng
from .env import EpisodeConfig, PRPEnv
from .policy import PolicyParams, init_policy, log_softmax, policy_forward, policy_logits, ppo_loss


@dataclass(frozen=True)
class PPOConfig:
    learning_rate: float = 1e-3
    n_steps: int = 2048
    batch_size: int = 128
    n_epochs: int = 4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    normalize_advantage: bool = True
    hidden: tuple = (64, 64)
    adam_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.n_steps < 1 or self.batch_size < 1 or self.n_epochs < 1:
            raise ValueError("n_steps, batch_size and n_epochs must be positive")
        if self.learning_rate <= 0 or self.clip_range <= 0:
            raise ValueError("learning_rate and clip_range must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "PPOConfig":
        return cls(**doc)


class Adam:
    def __init__(self, size: int, lr: float, eps: float = 1e-5, betas=(0.9, 0.999)):
        self.lr, self.eps = lr, eps
        self.b1, self.b2 = betas
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def gae(rewards, values, dones, last_value, last_done, gamma, lam):
    """Generalised advantage estimates and returns for one rollout.

    ``dones[i]`` marks that step ``i`` ended its episode.
    """
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for i in range(n - 1, -1, -1):
        if i == n - 1:
            next_value, next_live = last_value, 1.0 - last_done
        else:
            next_value, next_live = values[i + 1], 1.0 - dones[i]
        if dones[i]:
            next_live = 0.0
        delta = rewards[i] + gamma * next_value * next_live - values[i]
        running = delta + gamma * lam * next_live * running
        adv[i] = running
    return adv, adv + values


TRAIN_LOG_COLUMNS = (
    "timestep", "episode", "reward", "best_cost", "entropy",
    "policy_loss", "value_loss", "entropy_loss", "total_loss",
)


@dataclass
class EpisodeRecord:
    episode: int
    steps: int
    total_reward: float
    initial_cost: int
    best_cost: int
    complete: bool


@dataclass
class TrainResult:
    policy: PolicyParams
    log: list = field(default_factory=list)
    episodes: list = field(default_factory=list)
    wall_time: float = 0.0

    def completed_episodes(self) -> list:
        return [e for e in self.episodes if e.complete]

    def log_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAIN_LOG_COLUMNS)
        for row in self.log:
            w.writerow([row[0], row[1], *(repr(float(x)) for x in row[2:3]), row[3],
                        *(repr(float(x)) for x in row[4:])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _sample(probs, rng) -> int:
    cum = np.cumsum(probs)
    return int(min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), len(probs) - 1))


def train(
    instance: Instance,
    episode_config: EpisodeConfig = None,
    ppo_config: PPOConfig = None,
    total_timesteps: int = 20000,
    seed=0,
    policy: PolicyParams = None,
) -> TrainResult:
    """Train an operator-selection policy on repeated searches over ``instance``.

    Rollouts of ``n_steps`` transitions (the last one shorter when the budget
    is not a multiple) feed ``n_epochs`` passes of minibatch updates. The log
    has exactly one row per environment step.
    """
    t0 = time.perf_counter()
    cfg = episode_config or EpisodeConfig()
    hp = ppo_config or PPOConfig()
    if total_timesteps < 0:
        raise ValueError("total_timesteps must be nonnegative")
    rng = check_rng(seed)
    env_rng, act_rng, init_rng, batch_rng = rng.spawn(4)
    env = PRPEnv(instance, cfg)
    params = policy.copy() if policy is not None else init_policy(cfg.obs_dim, cfg.n_actions, hp.hidden, init_rng)
    result = TrainResult(params)
    if total_timesteps == 0:
        result.wall_time = time.perf_counter() - t0
        return result
    opt = Adam(params.size, hp.learning_rate, hp.adam_eps)

    obs = env.reset(env_rng)
    episode, ep_reward, ep_steps = 0, 0.0, 0
    done = False
    step = 0
    while step < total_timesteps:
        n = min(hp.n_steps, total_timesteps - step)
        buf_obs = np.zeros((n, cfg.obs_dim))
        buf_act = np.zeros(n, dtype=np.int64)
        buf_logp = np.zeros(n)
        buf_val = np.zeros(n)
        buf_rew = np.zeros(n)
        buf_done = np.zeros(n)
        pending_rows = []
        for i in range(n):
            probs, value = policy_forward(params, obs)
            a = _sample(probs, act_rng)
            buf_obs[i], buf_act[i], buf_val[i] = obs, a, value
            buf_logp[i] = np.log(probs[a])
            entropy = float(-(probs * np.log(np.clip(probs, 1e-300, None))).sum())
            obs, reward, done, info = env.step(a)
            buf_rew[i], buf_done[i] = reward, float(done)
            ep_reward += reward
            ep_steps += 1
            step += 1
            pending_rows.append((step, episode, reward, info.best_cost, entropy))
            if done:
                result.episodes.append(EpisodeRecord(episode, ep_steps, ep_reward, env.state.c_init,
                                                     env.state.best_cost, True))
                episode += 1
                ep_reward, ep_steps = 0.0, 0
                obs = env.reset(env_rng)
                done = False
        _, last_value = policy_forward(params, obs)
        adv, ret = gae(buf_rew, buf_val, buf_done, last_value, 0.0, hp.gamma, hp.gae_lambda)

        terms = _update(params, opt, hp, buf_obs, buf_act, buf_logp, adv, ret, batch_rng)
        losses = (terms.policy, terms.value, -terms.entropy, terms.total)
        result.log.extend(row + losses for row in pending_rows)

    if ep_steps:
        result.episodes.append(EpisodeRecord(episode, ep_steps, ep_reward, env.state.c_init,
                                             env.state.best_cost, False))
    result.policy = params
    result.wall_time = time.perf_counter() - t0
    return result


def _update(params, opt, hp: PPOConfig, obs, act, old_logp, adv, ret, rng):
    n = len(act)
    last = None
    for _ in range(hp.n_epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            mb = order[start : start + hp.batch_size]
            a = adv[mb]
            if hp.normalize_advantage and len(mb) > 1:
                a = (a - a.mean()) / (a.std() + 1e-8)
            terms, grad = ppo_loss(params, obs[mb], act[mb], old_logp[mb], a, ret[mb],
                                   hp.clip_range, hp.ent_coef, hp.vf_coef)
            if not (np.isfinite(terms.total) and np.all(np.isfinite(grad))):
                raise TrainingError(
                    f"non-finite loss during update: policy={terms.policy} value={terms.value} "
                    f"entropy={terms.entropy}"
                )
            norm = np.linalg.norm(grad)
            if hp.max_grad_norm is not None and norm > hp.max_grad_norm:
                grad = grad * (hp.max_grad_norm / (norm + 1e-6))
            opt.step(params.flat, grad)
            last = terms
    return last


def select_action(params: PolicyParams, obs, mode: str, rng) -> int:
    if mode == "greedy":
        return int(np.argmax(policy_logits(params, obs)[0]))
    if mode == "stochastic":
        return _sample(np.exp(log_softmax(policy_logits(params, obs)[0])), rng)
    raise ValueError("mode must be 'greedy' or 'stochastic'")


def infer(
    policy: PolicyParams,
    instance: Instance,
    episode_config: EpisodeConfig = None,
    mode: str = "greedy",
    seed=0,
    on_accept=None,
):
    """Run one policy-driven search. Returns ``(best_solution, stats)``.

    Stats rows use the classic layout, with ``delta = new - current``.
    """
    t0 = time.perf_counter()
    cfg = episode_config or EpisodeConfig()
    if policy.obs_dim != cfg.obs_dim or policy.n_actions != cfg.n_actions:
        raise ValueError(
            f"policy expects {policy.obs_dim} observations and {policy.n_actions} actions; "
            f"episode config gives {cfg.obs_dim} and {cfg.n_actions}"
        )
    rng = check_rng(seed)
    env_rng, act_rng = rng.spawn(2)
    env = PRPEnv(instance, cfg)
    obs = env.reset(env_rng)
    stats = SearchStats(initial_cost=env.state.c_init)
    done = False
    while not done:
        a = select_action(policy, obs, mode, act_rng)
        obs, _, done, info = env.step(a)
        if info.accepted and on_accept is not None:
            on_accept(env.state.t - 1, env.state.current)
        stats.record(
            env.state.t - 1,
            DESTROY_OPERATORS[info.action.destroy],
            "" if info.destroy_failed else REPAIR_OPERATORS[info.action.repair],
            info.dod,
            None if (info.repair_failed or info.destroy_failed) else -info.delta,
            info.accepted,
            info.sigma,
            info.temperature,
            info.current_cost,
            info.best_cost,
        )
    stats.wall_time = time.perf_counter() - t0
    return env.state.best.to_solution(), stats
