"""The ALNS loop as an episodic decision process.

Each step the agent picks a destroy operator, a repair operator and a degree
of destruction, encoded as one integer. The environment applies them to the
incumbent, runs the annealing acceptance test and returns a shaped reward.

Cost changes follow ``delta = C_old - C_new`` here, so a positive delta is an
improvement. :class:`~prpkit.alns.SearchStats` rows store ``C_new - C_old``
like the classic search does.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..alns import (
    DESTROY_OPERATORS,
    REPAIR_OPERATORS,
    DestroyError,
    OperatorContext,
    SearchState,
    abc_classes_or_default,
    apply_destroy,
    apply_repair,
    greedy_state,
    update_weight,
)
from ..model import Instance
from ..validation import check_rng

N_DESTROY = len(DESTROY_OPERATORS)
N_REPAIR = len(REPAIR_OPERATORS)

OBSERVATION_FIELDS = (
    ("temperature", 1),
    ("last_delta", 1),
    ("gap", 1),
    ("destroy_weights", N_DESTROY),
    ("repair_weights", N_REPAIR),
    ("current_over_best", 1),
    ("best_cost", 1),
    ("cost_gap", 1),
    ("progress", 1),
)


@dataclass(frozen=True)
class EpisodeConfig:
    """Search schedule and operator-weight rule for one episode.

    With the defaults the temperature reaches ``t_stop`` after 342 steps,
    which ends the episode before ``t_max`` does.
    """

    t_max: int = 1000
    t_start: float = 1.0
    t_stop: float = 0.001
    decrease: float = 0.98
    dod_levels: tuple = (0.05, 0.10, 0.20)
    weight_floor: float = 0.1
    reaction: float = 0.95
    scale_costs: bool = True
    repair_order: str = "dwell"
    tetris_phase1: str = "highest"

    def __post_init__(self):
        object.__setattr__(self, "dod_levels", tuple(float(x) for x in self.dod_levels))
        if self.t_max < 1:
            raise ValueError("t_max must be positive")
        if not (self.t_start > self.t_stop > 0):
            raise ValueError("need t_start > t_stop > 0")
        if not 0 < self.decrease < 1:
            raise ValueError("decrease must lie in (0, 1)")
        lv = self.dod_levels
        if not lv or any(not 0 < x <= 1 for x in lv) or any(a >= b for a, b in zip(lv, lv[1:])):
            raise ValueError("dod_levels must be strictly increasing values in (0, 1]")
        if not 0 <= self.reaction <= 1:
            raise ValueError("reaction must lie in [0, 1]")

    @property
    def n_actions(self) -> int:
        return N_DESTROY * N_REPAIR * len(self.dod_levels)

    @property
    def obs_dim(self) -> int:
        return 7 + N_DESTROY + N_REPAIR

    def episode_length(self) -> int:
        """Number of steps until ``done`` under this schedule."""
        T, t = self.t_start, 0
        while True:
            T = max(self.t_stop, T * self.decrease)
            t += 1
            if T <= self.t_stop or t >= self.t_max:
                return t

    def to_dict(self) -> dict:
        return {
            "t_max": self.t_max,
            "t_start": self.t_start,
            "t_stop": self.t_stop,
            "decrease": self.decrease,
            "dod_levels": list(self.dod_levels),
            "weight_floor": self.weight_floor,
            "reaction": self.reaction,
            "scale_costs": self.scale_costs,
            "repair_order": self.repair_order,
            "tetris_phase1": self.tetris_phase1,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EpisodeConfig":
        return cls(**doc)


# --------------------------------------------------------------------------
# actions
# --------------------------------------------------------------------------
class ActionTriple(NamedTuple):
    destroy: int
    repair: int
    dod: int


def encode_action(d: int, r: int, level: int, n_destroy=N_DESTROY, n_repair=N_REPAIR, n_levels=3) -> int:
    if not (0 <= d < n_destroy and 0 <= r < n_repair and 0 <= level < n_levels):
        raise ValueError(f"action ({d}, {r}, {level}) out of range")
    return d * (n_repair * n_levels) + r * n_levels + level


def decode_action(a: int, n_destroy=N_DESTROY, n_repair=N_REPAIR, n_levels=3) -> ActionTriple:
    a = int(a)
    if not 0 <= a < n_destroy * n_repair * n_levels:
        raise ValueError(f"action code {a} outside [0, {n_destroy * n_repair * n_levels})")
    d, rest = divmod(a, n_repair * n_levels)
    r, level = divmod(rest, n_levels)
    return ActionTriple(d, r, level)


# --------------------------------------------------------------------------
# reward
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class RewardBreakdown:
    improvement: float = 0.0
    new_best: float = 0.0
    fluctuation: float = 0.0
    repair_failure: float = 0.0
    rejection: float = 0.0
    exploration: float = 0.0
    destroy_failure: bool = False

    @property
    def total(self) -> float:
        if self.destroy_failure:
            return -1.0
        return (self.improvement + self.new_best + self.fluctuation
                + self.repair_failure + self.rejection + self.exploration)


def fluctuates(history) -> bool:
    """True when the last three deltas went down, up, down (signs +, -, +)."""
    if len(history) < 3:
        return False
    a, b, c = list(history)[-3:]
    return a > 0 and b < 0 and c > 0


def compute_reward(
    delta,
    c_init,
    new_best=False,
    history=(),
    repair_failed=False,
    rejected=False,
    accepted_worse=False,
    temperature=1.0,
    t_start=1.0,
    destroy_failed=False,
) -> RewardBreakdown:
    """Shaped reward of one step.

    ``history`` holds the recent deltas in chronological order, ending with
    the current one.
    """
    if c_init <= 0:
        raise ValueError("c_init must be positive")
    if destroy_failed:
        return RewardBreakdown(destroy_failure=True)
    return RewardBreakdown(
        improvement=delta / c_init,
        new_best=1.0 if new_best else 0.0,
        fluctuation=-0.5 if fluctuates(history) else 0.0,
        repair_failure=-0.2 if repair_failed else 0.0,
        rejection=-0.1 if rejected else 0.0,
        exploration=0.1 * (temperature / t_start) if accepted_worse else 0.0,
    )


def step_score(repair_failed: bool, accepted: bool, new_best: bool, improved: bool) -> int:
    if repair_failed or not accepted:
        return 0
    if new_best:
        return 3
    return 2 if improved else 1


# --------------------------------------------------------------------------
# environment
# --------------------------------------------------------------------------
@dataclass
class StepInfo:
    action: ActionTriple
    dod: float
    delta: int
    accepted: bool
    sigma: int
    repair_failed: bool
    destroy_failed: bool
    temperature: float
    current_cost: int
    best_cost: int
    reward: RewardBreakdown


@dataclass
class EnvState:
    instance: Instance
    config: EpisodeConfig
    rng: np.random.Generator
    ctx: OperatorContext
    current: SearchState
    best: SearchState
    c_init: int
    temperature: float
    t: int = 0
    destroy_weights: np.ndarray = field(default_factory=lambda: np.ones(N_DESTROY))
    repair_weights: np.ndarray = field(default_factory=lambda: np.ones(N_REPAIR))
    history: deque = field(default_factory=lambda: deque(maxlen=3))
    last_delta: int = 0
    done: bool = False

    @property
    def current_cost(self) -> int:
        return self.current.total

    @property
    def best_cost(self) -> int:
        return self.best.total


def observe(state: EnvState) -> np.ndarray:
    cfg = state.config
    # costs are positive whenever there is a decision; the guard only covers
    # instances without departures
    c_best = max(state.best.total, 1)
    c_cur = state.current.total
    c_init = max(state.c_init, 1)
    scale = 1.0 / c_init if cfg.scale_costs else 1.0
    obs = np.empty(cfg.obs_dim)
    obs[0] = state.temperature / cfg.t_start
    obs[1] = state.last_delta / c_best
    obs[2] = (c_cur - state.best.total) / c_best
    obs[3 : 3 + N_DESTROY] = state.destroy_weights / state.destroy_weights.sum()
    j = 3 + N_DESTROY
    obs[j : j + N_REPAIR] = state.repair_weights / state.repair_weights.sum()
    j += N_REPAIR
    obs[j] = c_cur / c_best
    obs[j + 1] = state.best.total * scale
    obs[j + 2] = (c_cur - state.best.total) * scale
    obs[j + 3] = state.t / cfg.t_max
    return obs


def env_reset(instance: Instance, config: EpisodeConfig = None, rng=None, s0: SearchState = None):
    """Start an episode from the cheapest construction. Returns ``(state, observation)``."""
    config = config or EpisodeConfig()
    rng = check_rng(rng)
    start = s0.copy() if s0 is not None else greedy_state(instance)
    state = EnvState(
        instance=instance,
        config=config,
        rng=rng,
        ctx=OperatorContext(rng, abc_classes_or_default(instance), config.tetris_phase1, config.repair_order),
        current=start,
        best=start,
        c_init=start.total,
        temperature=config.t_start,
    )
    return state, observe(state)


def _accept(delta: int, temperature: float, rng) -> bool:
    if delta > 0:
        return True
    return bool(rng.random() < math.exp(delta / temperature))


def env_step(state: EnvState, action: int):
    """Advance one search iteration. Returns ``(observation, reward, done, info)``."""
    if state.done:
        raise RuntimeError("episode is over; call env_reset")
    cfg = state.config
    a = decode_action(action, N_DESTROY, N_REPAIR, len(cfg.dod_levels))
    dod = cfg.dod_levels[a.dod]
    temperature = state.temperature
    c_init = max(state.c_init, 1)

    destroy_failed = repair_failed = accepted = new_best = False
    delta = 0
    try:
        partial, destroyed = apply_destroy(a.destroy, state.current, dod, state.ctx)
    except DestroyError:
        destroy_failed = True

    if destroy_failed:
        sigma = 0
        reward = compute_reward(0, c_init, destroy_failed=True)
    else:
        cand, unplaced = apply_repair(a.repair, partial, destroyed, state.ctx)
        repair_failed = bool(unplaced)
        if not repair_failed:
            delta = state.current.total - cand.total
            accepted = _accept(delta, temperature, state.rng)
            if accepted:
                state.current = cand
                if cand.total < state.best.total:
                    state.best = cand
                    new_best = True
        sigma = step_score(repair_failed, accepted, new_best, delta > 0)
        state.history.append(delta)
        state.last_delta = delta
        reward = compute_reward(
            delta,
            c_init,
            new_best=new_best,
            history=state.history,
            repair_failed=repair_failed,
            rejected=not accepted,
            accepted_worse=accepted and delta <= 0,
            temperature=temperature,
            t_start=cfg.t_start,
        )
    # a failed destroy leaves the repair weight alone: no repair was chosen
    state.destroy_weights[a.destroy] = update_weight(
        state.destroy_weights[a.destroy], sigma, cfg.reaction, cfg.weight_floor
    )
    if not destroy_failed:
        state.repair_weights[a.repair] = update_weight(
            state.repair_weights[a.repair], sigma, cfg.reaction, cfg.weight_floor
        )

    state.temperature = max(cfg.t_stop, temperature * cfg.decrease)
    state.t += 1
    state.done = state.temperature <= cfg.t_stop or state.t >= cfg.t_max
    info = StepInfo(a, dod, delta, accepted, sigma, repair_failed, destroy_failed, temperature,
                    state.current.total, state.best.total, reward)
    return observe(state), reward.total, state.done, info


class PRPEnv:
    """Gym-style wrapper: ``reset(seed) -> obs`` and ``step(a) -> (obs, r, done, info)``."""

    def __init__(self, instance: Instance, config: EpisodeConfig = None):
        self.instance = instance
        self.config = config or EpisodeConfig()
        self.state = None
        self._start = None

    @property
    def n_actions(self) -> int:
        return self.config.n_actions

    @property
    def obs_dim(self) -> int:
        return self.config.obs_dim

    def reset(self, rng=None) -> np.ndarray:
        if self._start is None:
            self._start = greedy_state(self.instance)
        self.state, obs = env_reset(self.instance, self.config, rng, s0=self._start)
        return obs

    def step(self, action: int):
        if self.state is None:
            raise RuntimeError("call reset before step")
        return env_step(self.state, action)
