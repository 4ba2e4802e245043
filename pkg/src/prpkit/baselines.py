"""Reference placement policies and an exact branch-and-bound oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .alns import SearchState, abc_classes_or_default, greedy_state
from .exceptions import InfeasibleInstanceError
from .model import Instance, Solution
from .validation import check_rng


def _no_location(instance, t):
    return InfeasibleInstanceError(
        f"no feasible location for pod {instance.departing_pod(t)} at iteration {t}"
    )


def random_place(instance: Instance, rng=None) -> Solution:
    """Store every returning pod at a uniformly drawn feasible location."""
    rng = check_rng(rng)
    state = SearchState.empty(instance)
    for t in instance.departure_times:
        t = int(t)
        locs, _ = state.feasible(t)
        if len(locs) == 0:
            raise _no_location(instance, t)
        state.assign(t, int(locs[rng.integers(len(locs))]))
    return state.to_solution()


def cheapest_place(instance: Instance, mode: str = "store") -> Solution:
    """Nearest feasible location to the origin station (ties by location id).

    ``mode="full"`` ranks by the full placement cost instead, which is the
    construction used to seed the search.
    """
    return greedy_state(instance, mode).to_solution()


def _home_policy(instance: Instance, home: np.ndarray) -> Solution:
    # a pod whose home is still blocked by its initial occupant falls back to
    # the cheapest feasible location for that one stay
    state = SearchState.empty(instance)
    dep_pod = instance._arrays["dep_pod"]
    fallbacks = 0
    for t in instance.departure_times:
        t = int(t)
        locs, _ = state.feasible(t)
        if len(locs) == 0:
            raise _no_location(instance, t)
        h = home[dep_pod[t]]
        if h >= 0 and state.index.free_mask(t)[h]:
            state.assign(t, int(h))
        else:
            fallbacks += 1
            state.assign(t, int(locs[0]))
    sol = state.to_solution()
    sol.meta["fallbacks"] = fallbacks
    sol.meta["homes"] = home.tolist()
    return sol


def fixed_homes(instance: Instance) -> np.ndarray:
    """Home = initial location; queued pods take the nearest free slots."""
    home = np.full(instance.n_pods, -1, dtype=np.int64)
    taken = np.zeros(instance.n_locations, dtype=bool)
    for q, p in enumerate(instance.initial_config):
        if p is not None:
            home[p] = q
            taken[q] = True
    store = instance.layout.store_cost
    for s, queue in enumerate(instance.initial_queues):
        for p in queue:
            free = np.flatnonzero(~taken)
            q = int(free[np.lexsort((free, store[s, free]))[0]])
            home[p] = q
            taken[q] = True
    # pods only ever seen at a station after t=0 cannot exist (all pods are placed at t=0)
    return home


def fixed_place(instance: Instance) -> Solution:
    """Every pod always returns to its dedicated home slot."""
    return _home_policy(instance, fixed_homes(instance))


def location_ranking(instance: Instance) -> np.ndarray:
    """Locations sorted by summed distance to all stations, ties by id."""
    dist = instance.layout.store_cost.sum(axis=0)
    ids = np.arange(instance.n_locations)
    return ids[np.lexsort((ids, dist))]


def frequency_homes(instance: Instance) -> np.ndarray:
    freq = instance.frequencies
    ids = np.arange(instance.n_pods)
    pods_by_rank = ids[np.lexsort((ids, -freq))]
    home = np.full(instance.n_pods, -1, dtype=np.int64)
    home[pods_by_rank] = location_ranking(instance)[: instance.n_pods]
    return home


def fixed_place_approx(instance: Instance) -> Solution:
    """Dedicated homes by frequency rank: busiest pod gets the best-connected slot."""
    return _home_policy(instance, frequency_homes(instance))


def abc_zones(instance: Instance, classes=None) -> np.ndarray:
    """Zone label (``"A"``, ``"B"``, ``"C"``) per location.

    Locations ranked by station distance are cut in proportion to the number
    of pods in each class.
    """
    classes = abc_classes_or_default(instance) if classes is None else classes
    P, L = instance.n_pods, instance.n_locations
    n_a = int((classes == "A").sum())
    n_b = int((classes == "B").sum())
    cut_a = math.ceil(L * n_a / P)
    cut_b = math.ceil(L * (n_a + n_b) / P)
    zones = np.empty(L, dtype="<U1")
    ranking = location_ranking(instance)
    zones[ranking[:cut_a]] = "A"
    zones[ranking[cut_a:cut_b]] = "B"
    zones[ranking[cut_b:]] = "C"
    return zones


def tetris_baseline(instance: Instance) -> Solution:
    """Forward greedy pass with distance zones reserved per ABC class.

    Each returning pod takes the cheapest feasible location inside its class
    zone and only spills over to the cheapest feasible location anywhere when
    its zone is full.
    """
    classes = abc_classes_or_default(instance)
    zones = abc_zones(instance, classes)
    dep_pod = instance._arrays["dep_pod"]
    state = SearchState.empty(instance)
    for t in instance.departure_times:
        t = int(t)
        locs, _ = state.feasible(t)
        if len(locs) == 0:
            raise _no_location(instance, t)
        inside = locs[zones[locs] == classes[dep_pod[t]]]
        state.assign(t, int(inside[0] if len(inside) else locs[0]))
    return state.to_solution()


@dataclass
class ExactResult:
    solution: Solution
    cost: int
    optimal: bool
    nodes: int
    meta: dict = field(default_factory=dict)


def exact_oracle(instance: Instance, node_budget: int = 2_000_000, prune: bool = True) -> ExactResult:
    """Depth-first branch and bound over the per-departure feasible choices.

    Decisions are taken in time order, children cheapest first. A node is cut
    when its partial cost plus the sum of per-decision minimum costs still to
    come cannot beat the incumbent. The cheapest-construction solution is the
    first incumbent. With ``prune=False`` every feasible completion is visited.

    If the budget runs out the best solution found so far is returned with
    ``optimal=False``.
    """
    times = [int(t) for t in instance.departure_times]
    n = len(times)
    suffix_lb = np.zeros(n + 1, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        suffix_lb[i] = suffix_lb[i + 1] + int(instance.cost_row(times[i]).min())

    incumbent = greedy_state(instance) if n else SearchState.empty(instance)
    best = {"cost": incumbent.total if prune else math.inf, "assign": incumbent.assignments.copy()}
    state = SearchState.empty(instance)
    nodes = 0
    exhausted = False

    def dfs(i):
        nonlocal nodes, exhausted
        if exhausted:
            return
        if i == n:
            if state.total < best["cost"]:
                best["cost"] = state.total
                best["assign"] = state.assignments.copy()
            return
        if prune and state.total + suffix_lb[i] >= best["cost"]:
            return
        t = times[i]
        locs, _ = state.feasible(t)
        for q in locs:
            nodes += 1
            if nodes > node_budget:
                exhausted = True
                return
            state.assign(t, int(q))
            dfs(i + 1)
            state.unassign(t)
            if exhausted:
                return

    dfs(0)
    if best["cost"] == math.inf:
        raise InfeasibleInstanceError("instance has no feasible solution")
    return ExactResult(Solution(best["assign"]), int(best["cost"]), not exhausted, nodes)
