"""Estimator-style wrappers with ``get_params``/``set_params`` from scikit-learn.

``fit(instance)`` does the expensive work once: it solves the instance for the
heuristics and trains the policy for :class:`DRALNSSolver`. ``predict`` returns a
:class:`~prpkit.model.Solution`, and ``score`` is the negated travel cost so that
higher is better, as scikit-learn expects.
"""

from __future__ import annotations

import time

from sklearn.base import BaseEstimator

from . import baselines
from .alns import OperatorWeights, SAParams, run_alns
from .model import Instance, Solution, solution_cost
from .validation import check_instance, check_is_fitted, check_rng


class _SolverMixin:
    def _solve(self, instance: Instance):
        raise NotImplementedError

    def fit(self, instance: Instance, y=None):
        check_instance(instance)
        t0 = time.perf_counter()
        self.solution_, self.stats_ = self._solve(instance)
        self.runtime_ = time.perf_counter() - t0
        self.cost_ = solution_cost(instance, self.solution_)
        self.instance_name_ = instance.name
        return self

    def predict(self, instance: Instance = None) -> Solution:
        """Solution for ``instance``; without an argument, the one found by ``fit``."""
        if instance is None:
            check_is_fitted(self, "solution_")
            return self.solution_
        check_instance(instance)
        return self._solve(instance)[0]

    def fit_predict(self, instance: Instance, y=None) -> Solution:
        return self.fit(instance).solution_

    def score(self, instance: Instance, y=None) -> float:
        return -float(solution_cost(instance, self.predict(instance)))


class BaselineSolver(_SolverMixin, BaseEstimator):
    """One of the reference policies.

    ``method`` is ``"random_place"``, ``"cheapest_place"``, ``"fixed_place"``,
    ``"fixed_place_approx"``, ``"tetris"`` or ``"exact_oracle"``.
    """

    METHODS = ("random_place", "cheapest_place", "fixed_place", "fixed_place_approx", "tetris", "exact_oracle")

    def __init__(self, method: str = "cheapest_place", random_state=None, node_budget: int = 2_000_000):
        self.method = method
        self.random_state = random_state
        self.node_budget = node_budget

    def _solve(self, instance):
        m = self.method
        if m == "random_place":
            return baselines.random_place(instance, check_rng(self.random_state)), None
        if m == "cheapest_place":
            return baselines.cheapest_place(instance), None
        if m == "fixed_place":
            return baselines.fixed_place(instance), None
        if m == "fixed_place_approx":
            return baselines.fixed_place_approx(instance), None
        if m == "tetris":
            return baselines.tetris_baseline(instance), None
        if m == "exact_oracle":
            res = baselines.exact_oracle(instance, self.node_budget)
            res.solution.meta.update(optimal=res.optimal, nodes=res.nodes)
            return res.solution, res
        raise ValueError(f"unknown baseline {m!r}; choose from {', '.join(self.METHODS)}")


class ALNSSolver(_SolverMixin, BaseEstimator):
    """Adaptive large neighbourhood search with simulated-annealing acceptance."""

    def __init__(
        self,
        budget: int = 1000,
        dod: float = 0.05,
        t_start: float = 12.5,
        t_stop: float = 0.1,
        alpha: float = 0.95,
        chain_length: int = 30,
        p_accept: float = 0.25,
        stagnation_limit=200,
        cooling: str = "chain",
        reaction: float = 0.8,
        weight_floor: float = 0.0,
        tetris_phase1: str = "highest",
        repair_order: str = "dwell",
        random_state=None,
    ):
        self.budget = budget
        self.dod = dod
        self.t_start = t_start
        self.t_stop = t_stop
        self.alpha = alpha
        self.chain_length = chain_length
        self.p_accept = p_accept
        self.stagnation_limit = stagnation_limit
        self.cooling = cooling
        self.reaction = reaction
        self.weight_floor = weight_floor
        self.tetris_phase1 = tetris_phase1
        self.repair_order = repair_order
        self.random_state = random_state

    def sa_params(self) -> SAParams:
        return SAParams(self.t_start, self.t_stop, self.alpha, self.chain_length, self.p_accept,
                        self.stagnation_limit, self.cooling)

    def _solve(self, instance):
        weights = OperatorWeights.uniform(reaction=self.reaction, floor=self.weight_floor)
        return run_alns(
            instance,
            sa=self.sa_params(),
            weights=weights,
            dod=self.dod,
            rng=check_rng(self.random_state),
            budget=self.budget,
            tetris_phase1=self.tetris_phase1,
            repair_order=self.repair_order,
        )


class DRALNSSolver(BaseEstimator):
    """ALNS whose operators and destruction degree are chosen by a trained policy.

    ``fit`` trains the policy on one instance; ``predict`` runs one
    policy-driven search on any instance with the same operator sets.
    """

    def __init__(
        self,
        total_timesteps: int = 20000,
        mode: str = "greedy",
        episode_config=None,
        ppo_config=None,
        random_state=0,
    ):
        self.total_timesteps = total_timesteps
        self.mode = mode
        self.episode_config = episode_config
        self.ppo_config = ppo_config
        self.random_state = random_state

    def fit(self, instance: Instance, y=None):
        from .drl import train

        check_instance(instance)
        res = train(instance, self.episode_config, self.ppo_config, self.total_timesteps, self.random_state)
        self.policy_ = res.policy
        self.train_result_ = res
        return self

    def set_policy(self, policy):
        """Use an existing policy instead of training one."""
        self.policy_ = policy
        return self

    def predict(self, instance: Instance) -> Solution:
        from .drl import infer

        check_is_fitted(self, "policy_")
        check_instance(instance)
        t0 = time.perf_counter()
        sol, stats = infer(self.policy_, instance, self.episode_config, self.mode, self.random_state)
        self.stats_ = stats
        self.runtime_ = time.perf_counter() - t0
        return sol

    def score(self, instance: Instance, y=None) -> float:
        return -float(solution_cost(instance, self.predict(instance)))
