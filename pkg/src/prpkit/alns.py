"""Adaptive large neighbourhood search for pod repositioning.

The search works on decision indices: the ``i``-th decision is the ``i``-th
departure iteration of the instance. Destroy operators remove a run of ``k``
consecutive decisions; repair operators re-insert them using the feasible sets
of an :class:`~prpkit.feasibility.OccupancyIndex`.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import InfeasibleInstanceError, PRPError
from .feasibility import OccupancyIndex
from .model import UNASSIGNED, Instance, Solution
from .validation import check_rng

DESTROY_OPERATORS = ("random", "high_cost")
REPAIR_OPERATORS = ("tetris", "abc", "lowest_cost", "random")

ABC_RANK = {"A": 0, "B": 1, "C": 2}

# stored weights never drop below this, so roulette selection stays defined
# even with a zero floor and a long run of zero scores
MIN_WEIGHT = 1e-6


class DestroyError(PRPError):
    """Nothing can be removed from the solution."""


# --------------------------------------------------------------------------
# search state
# --------------------------------------------------------------------------
class SearchState:
    """A (possibly partial) solution together with its occupancy index and costs.

    Operators never mutate a state they were handed except where documented;
    destroy operators return a modified copy.
    """

    def __init__(self, instance: Instance, assignments: np.ndarray, index: OccupancyIndex, costs: np.ndarray):
        self.instance = instance
        self.assignments = assignments
        self.index = index
        self.costs = costs
        self.total = int(costs.sum())

    @classmethod
    def empty(cls, instance: Instance) -> "SearchState":
        n = instance.horizon
        return cls(instance, np.full(n, UNASSIGNED, dtype=np.int64), OccupancyIndex(instance), np.zeros(n, np.int64))

    @classmethod
    def from_solution(cls, instance: Instance, solution: Solution) -> "SearchState":
        state = cls.empty(instance)
        for t in instance.departure_times:
            q = solution.assignments[t]
            if q >= 0:
                state.assign(int(t), int(q))
        return state

    def copy(self) -> "SearchState":
        new = SearchState.__new__(SearchState)
        new.instance = self.instance
        new.assignments = self.assignments.copy()
        new.index = self.index.copy()
        new.costs = self.costs.copy()
        new.total = self.total
        return new

    def assign(self, t: int, q: int):
        c = int(self.instance.cost_row(t)[q])
        self.assignments[t] = q
        self.index.add(t, q)
        self.costs[t] = c
        self.total += c

    def unassign(self, t: int):
        q = int(self.assignments[t])
        if q < 0:
            return
        self.index.remove(t, q)
        self.total -= int(self.costs[t])
        self.costs[t] = 0
        self.assignments[t] = UNASSIGNED

    def feasible(self, t: int):
        return self.index.feasible(t)

    def decision_costs(self) -> np.ndarray:
        return self.costs[self.instance.departure_times]

    def is_complete(self) -> bool:
        return bool((self.assignments[self.instance.departure_times] >= 0).all())

    def to_solution(self) -> Solution:
        return Solution(self.assignments.copy())


@dataclass(frozen=True)
class DestroySet:
    """Pending iterations plus what they held before destruction."""

    iterations: tuple
    previous: dict = field(default_factory=dict)  # t -> (location, cost)

    def __len__(self):
        return len(self.iterations)

    def __contains__(self, t):
        return t in self.previous


# --------------------------------------------------------------------------
# adaptive weights and acceptance
# --------------------------------------------------------------------------
def select_operator(weights, rng) -> int:
    """Roulette-wheel choice: index ``i`` with probability ``w_i / sum(w)``."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or not np.all(np.isfinite(w)) or (w <= 0).any():
        raise ValueError(f"operator weights must be nonempty, finite and positive: {weights}")
    cum = np.cumsum(w)
    i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(i, len(w) - 1)


def score_outcome(new_cost, current_cost, best_cost, accepted: bool) -> int:
    if new_cost < best_cost:
        return 3
    if new_cost < current_cost:
        return 2
    return 1 if accepted else 0


def update_weight(w: float, sigma: float, reaction: float, floor: float = 0.0) -> float:
    return max(floor, reaction * w + (1.0 - reaction) * sigma)


def sa_accept(delta, temperature: float, p_accept: float, rng) -> bool:
    """Simulated-annealing acceptance of a cost change ``delta = new - current``.

    Improvements are always accepted (without consuming randomness); otherwise
    the acceptance probability is ``max(exp(-delta / T), p_accept)``.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if delta < 0:
        return True
    p = max(math.exp(-delta / temperature), p_accept)
    return bool(rng.random() < p)


@dataclass
class OperatorWeights:
    destroy: np.ndarray
    repair: np.ndarray
    reaction: float = 0.8
    floor: float = 0.0

    def __post_init__(self):
        self.destroy = np.asarray(self.destroy, dtype=float).copy()
        self.repair = np.asarray(self.repair, dtype=float).copy()
        if not 0.0 <= self.reaction <= 1.0:
            raise ValueError("reaction must lie in [0, 1]")

    @classmethod
    def uniform(cls, n_destroy=len(DESTROY_OPERATORS), n_repair=len(REPAIR_OPERATORS), reaction=0.8, floor=0.0):
        return cls(np.ones(n_destroy), np.ones(n_repair), reaction, floor)

    def update(self, d: int, r: int, sigma: float):
        floor = max(self.floor, MIN_WEIGHT)
        self.destroy[d] = update_weight(self.destroy[d], sigma, self.reaction, floor)
        self.repair[r] = update_weight(self.repair[r], sigma, self.reaction, floor)

    def copy(self) -> "OperatorWeights":
        return OperatorWeights(self.destroy, self.repair, self.reaction, self.floor)


@dataclass
class SAParams:
    t_start: float = 12.5
    t_stop: float = 0.1
    alpha: float = 0.95
    chain_length: int = 30
    p_accept: float = 0.25
    stagnation_limit: Optional[int] = 200
    cooling: str = "chain"  # "chain": cool once per Markov chain; "iteration": every iteration

    def __post_init__(self):
        if not (self.t_start > self.t_stop > 0):
            raise ValueError("need t_start > t_stop > 0")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.chain_length < 1:
            raise ValueError("chain_length must be positive")
        if not 0 <= self.p_accept <= 1:
            raise ValueError("p_accept must lie in [0, 1]")
        if self.stagnation_limit is not None and self.stagnation_limit < 1:
            raise ValueError("stagnation_limit must be positive or None")
        if self.cooling not in ("chain", "iteration"):
            raise ValueError("cooling must be 'chain' or 'iteration'")


# --------------------------------------------------------------------------
# ABC classes
# --------------------------------------------------------------------------
def classify_abc(pods) -> np.ndarray:
    """Partition pods into A/B/C by cumulative usage (70% / 90% first crossing).

    ``pods`` is a sequence of :class:`~prpkit.model.Pod` or of frequencies.
    Returns an array of ``"A"``, ``"B"``, ``"C"`` indexed by pod id.
    """
    freq = np.array([getattr(p, "frequency", p) for p in pods], dtype=np.int64)
    total = int(freq.sum())
    if freq.size == 0 or total <= 0:
        raise ValueError("total pod frequency must be positive")
    order = sorted(range(len(freq)), key=lambda i: (-freq[i], i))
    classes = np.empty(len(freq), dtype="<U1")
    cum = 0
    for i in order:
        # integer comparisons keep the 70/90 boundaries exact
        if cum * 10 < 7 * total:
            classes[i] = "A"
        elif cum * 10 < 9 * total:
            classes[i] = "B"
        else:
            classes[i] = "C"
        cum += int(freq[i])
    return classes


def abc_classes_or_default(instance: Instance) -> np.ndarray:
    """ABC classes, or all ``"A"`` when no pod is ever requested."""
    if instance.frequencies.sum() > 0:
        return classify_abc(instance.pods)
    return np.full(instance.n_pods, "A")


# --------------------------------------------------------------------------
# destroy operators
# --------------------------------------------------------------------------
def removal_count(dod: float, n: int) -> int:
    if not 0 < dod <= 1:
        raise ValueError("degree of destruction must lie in (0, 1]")
    return min(n, max(1, math.floor(dod * n)))


def _destroy_window(state: SearchState, start: int, k: int):
    partial = state.copy()
    times = state.instance.departure_times[start : start + k]
    previous = {}
    for t in times:
        t = int(t)
        previous[t] = (int(partial.assignments[t]), int(partial.costs[t]))
        partial.unassign(t)
    return partial, DestroySet(tuple(int(t) for t in times), previous)


def destroy_random(state: SearchState, dod: float, rng):
    """Remove ``k = floor(dod * N)`` consecutive decisions from a uniform start."""
    n = state.instance.n_decisions
    if n == 0:
        raise DestroyError("solution has no decisions to remove")
    k = removal_count(dod, n)
    start = int(rng.integers(0, n - k + 1))
    return _destroy_window(state, start, k)


def high_cost_window(costs, k: int) -> int:
    """Start of the length-``k`` window with the largest cost sum (first on ties)."""
    c = np.concatenate(([0], np.cumsum(np.asarray(costs, dtype=np.int64))))
    sums = c[k:] - c[:-k]
    return int(np.argmax(sums))


def destroy_high_cost(state: SearchState, dod: float, rng=None):
    n = state.instance.n_decisions
    if n == 0:
        raise DestroyError("solution has no decisions to remove")
    k = removal_count(dod, n)
    return _destroy_window(state, high_cost_window(state.decision_costs(), k), k)


# --------------------------------------------------------------------------
# repair operators
# --------------------------------------------------------------------------
# Each repair works in place on ``partial`` and returns ``(partial, unplaced)``.


REPAIR_ORDERS = ("dwell", "time")


def pending_order(partial: SearchState, destroy_set: DestroySet, order: str = "dwell") -> list:
    """Pending iterations in the order a single-pass repair visits them.

    ``"dwell"`` visits the pods that stay stored longest first (ties by time),
    so the scarce long-free locations go to the pods that need them.
    ``"time"`` is plain ascending time order.
    """
    todo = [t for t in sorted(destroy_set.iterations) if partial.assignments[t] < 0]
    if order == "dwell":
        end = partial.instance._arrays["dwell_end"]
        todo.sort(key=lambda t: (-end[t], t))
    elif order != "time":
        raise ValueError(f"unknown repair order {order!r}")
    return todo


def repair_tetris(partial: SearchState, destroy_set: DestroySet, phase1: str = "highest"):
    """Two passes: costly decisions first, then by pod frequency and urgency.

    Phase 1 visits pending decisions by descending pre-destruction cost and
    takes the highest-cost feasible location (``phase1="lowest"`` flips this).
    Phase 2 places what is left, most frequent pods and earliest next summon
    first, at the cheapest feasible location.
    """
    inst = partial.instance
    todo = pending_order(partial, destroy_set, "time")
    todo.sort(key=lambda t: (-destroy_set.previous.get(t, (0, 0))[1], t))
    left = []
    for t in todo:
        locs, costs = partial.feasible(t)
        if len(locs) == 0:
            left.append(t)
            continue
        if phase1 == "highest":
            q = locs[int(np.searchsorted(costs, costs[-1]))]
        else:
            q = locs[0]
        partial.assign(t, int(q))
    freq = inst.frequencies
    nxt = inst._arrays["next_dep"]
    dep_pod = inst._arrays["dep_pod"]
    left.sort(key=lambda t: (-freq[dep_pod[t]], nxt[t] if nxt[t] >= 0 else inst.horizon, t))
    unplaced = []
    for t in left:
        locs, _ = partial.feasible(t)
        if len(locs) == 0:
            unplaced.append(t)
        else:
            partial.assign(t, int(locs[0]))
    return partial, unplaced


def repair_abc(partial: SearchState, destroy_set: DestroySet, classes, order: str = "dwell"):
    """Class A takes the cheapest feasible location, B the second, C the third."""
    dep_pod = partial.instance._arrays["dep_pod"]
    unplaced = []
    for t in pending_order(partial, destroy_set, order):
        locs, _ = partial.feasible(t)
        if len(locs) == 0:
            unplaced.append(t)
            continue
        rank = min(ABC_RANK[classes[dep_pod[t]]], len(locs) - 1)
        partial.assign(t, int(locs[rank]))
    return partial, unplaced


def repair_lowest_cost(partial: SearchState, destroy_set: DestroySet, order: str = "dwell"):
    unplaced = []
    for t in pending_order(partial, destroy_set, order):
        locs, _ = partial.feasible(t)
        if len(locs) == 0:
            unplaced.append(t)
        else:
            partial.assign(t, int(locs[0]))
    return partial, unplaced


def repair_random(partial: SearchState, destroy_set: DestroySet, rng, order: str = "dwell"):
    unplaced = []
    for t in pending_order(partial, destroy_set, order):
        locs, _ = partial.feasible(t)
        if len(locs) == 0:
            unplaced.append(t)
        else:
            partial.assign(t, int(locs[rng.integers(len(locs))]))
    return partial, unplaced


@dataclass
class OperatorContext:
    """Everything a repair operator may need besides the partial solution."""

    rng: np.random.Generator
    classes: np.ndarray
    tetris_phase1: str = "highest"
    repair_order: str = "dwell"


def apply_destroy(op: int, state: SearchState, dod: float, ctx: OperatorContext):
    if op == 0:
        return destroy_random(state, dod, ctx.rng)
    if op == 1:
        return destroy_high_cost(state, dod)
    raise IndexError(f"unknown destroy operator {op}")


def apply_repair(op: int, partial: SearchState, destroy_set: DestroySet, ctx: OperatorContext):
    if op == 0:
        return repair_tetris(partial, destroy_set, ctx.tetris_phase1)
    if op == 1:
        return repair_abc(partial, destroy_set, ctx.classes, ctx.repair_order)
    if op == 2:
        return repair_lowest_cost(partial, destroy_set, ctx.repair_order)
    if op == 3:
        return repair_random(partial, destroy_set, ctx.rng, ctx.repair_order)
    raise IndexError(f"unknown repair operator {op}")


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------
def greedy_state(instance: Instance, mode: str = "full") -> SearchState:
    """Forward pass placing each returning pod at its cheapest feasible location.

    ``mode="full"`` ranks by the bundled placement cost, ``mode="store"`` by
    the store leg only (nearest location to the origin station).
    """
    if mode not in ("full", "store"):
        raise ValueError("mode must be 'full' or 'store'")
    state = SearchState.empty(instance)
    store = instance.layout.store_cost
    dep_station = instance._arrays["dep_station"]
    for t in instance.departure_times:
        t = int(t)
        locs, _ = state.feasible(t)
        if len(locs) == 0:
            occupied = np.flatnonzero(state.index.config_at(t))
            raise InfeasibleInstanceError(
                f"no free location for pod {instance.departing_pod(t)} at iteration {t}; "
                f"occupied locations: {occupied.tolist()}"
            )
        if mode == "store":
            d = store[dep_station[t], locs]
            q = locs[np.lexsort((locs, d))[0]]
        else:
            q = locs[0]
        state.assign(t, int(q))
    return state


def initial_solution(instance: Instance, mode: str = "full") -> Solution:
    return greedy_state(instance, mode).to_solution()


# --------------------------------------------------------------------------
# search loop
# --------------------------------------------------------------------------
STATS_COLUMNS = (
    "iter",
    "destroy_op",
    "repair_op",
    "DoD",
    "delta",
    "accepted",
    "sigma",
    "temperature",
    "current_cost",
    "best_cost",
)


@dataclass
class SearchStats:
    """Per-iteration log of a search run.

    ``delta`` is ``new - current`` (negative means the candidate is cheaper) and
    is ``None`` when the repair failed.
    """

    initial_cost: int = 0
    rows: list = field(default_factory=list)
    best_costs: list = field(default_factory=list)
    wall_time: float = 0.0

    def record(self, it, destroy_op, repair_op, dod, delta, accepted, sigma, temperature, current, best):
        self.rows.append((it, destroy_op, repair_op, dod, delta, accepted, sigma, temperature, current, best))
        self.best_costs.append(best)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(STATS_COLUMNS)
        for it, d, r, dod, delta, acc, sigma, temp, cur, best in self.rows:
            w.writerow([it, d, r, f"{dod:g}", "" if delta is None else delta, int(acc), sigma, repr(float(temp)), cur, best])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def run_alns(
    instance: Instance,
    s0: Optional[Solution] = None,
    sa: Optional[SAParams] = None,
    weights: Optional[OperatorWeights] = None,
    dod: float = 0.05,
    rng=None,
    budget: int = 1000,
    tetris_phase1: str = "highest",
    repair_order: str = "dwell",
    on_accept: Optional[Callable[[int, SearchState], None]] = None,
):
    """Run adaptive large neighbourhood search from ``s0``.

    Returns ``(best_solution, stats)``. Repair failures count as rejected
    iterations with score 0. ``weights`` is updated in place.
    """
    t0 = time.perf_counter()
    rng = check_rng(rng)
    sa = sa or SAParams()
    weights = weights if weights is not None else OperatorWeights.uniform()
    state = greedy_state(instance) if s0 is None else SearchState.from_solution(instance, s0)
    if not state.is_complete():
        raise PRPError("initial solution must be complete")
    best = state
    stats = SearchStats(initial_cost=state.total)
    ctx = OperatorContext(rng, abc_classes_or_default(instance), tetris_phase1, repair_order)
    temperature = sa.t_start
    stagnant = 0
    for it in range(budget):
        d = select_operator(weights.destroy, rng)
        try:
            partial, destroyed = apply_destroy(d, state, dod, ctx)
        except DestroyError:
            weights.destroy[d] = update_weight(weights.destroy[d], 0, weights.reaction, max(weights.floor, MIN_WEIGHT))
            stats.record(it, DESTROY_OPERATORS[d], "", dod, None, False, 0, temperature, state.total, best.total)
            continue
        r = select_operator(weights.repair, rng)
        cand, unplaced = apply_repair(r, partial, destroyed, ctx)
        new_best = False
        if unplaced:
            delta, accepted, sigma = None, False, 0
        else:
            delta = cand.total - state.total
            accepted = sa_accept(delta, temperature, sa.p_accept, rng)
            sigma = score_outcome(cand.total, state.total, best.total, accepted)
            if accepted:
                state = cand
                if cand.total < best.total:
                    best = cand
                    new_best = True
                if on_accept is not None:
                    on_accept(it, state)
        weights.update(d, r, sigma)
        stats.record(it, DESTROY_OPERATORS[d], REPAIR_OPERATORS[r], dod, delta, accepted, sigma, temperature,
                     state.total, best.total)
        if sa.cooling == "iteration" or (it + 1) % sa.chain_length == 0:
            temperature = max(temperature * sa.alpha, sa.t_stop)
        stagnant = 0 if new_best else stagnant + 1
        if sa.stagnation_limit is not None and stagnant >= sa.stagnation_limit:
            temperature = sa.t_start
            stagnant = 0
    stats.wall_time = time.perf_counter() - t0
    return best.to_solution(), stats
