"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

from collections import deque
from numbers import Integral

import numpy as np

from .exceptions import IncompleteSolutionError, PRPError, StreamError
from .model import Instance, Solution, next_summons


def check_rng(seed=None) -> np.random.Generator:
    """Turn ``None``, an int or a Generator into a ``np.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (Integral, np.integer)):
        return np.random.default_rng(seed)
    raise ValueError(f"{seed!r} cannot be used to seed a numpy Generator")


def check_stream(instance: Instance) -> None:
    """Replay queues only and raise :class:`StreamError` on the first inconsistency."""
    S = instance.n_stations
    queues = [deque(q) for q in instance.initial_queues]
    in_storage = np.zeros(instance.n_pods, dtype=bool)
    for p in instance.initial_config:
        if p is not None:
            in_storage[p] = True
    for t in range(instance.horizon):
        dep = instance.events.departures[t]
        if dep is not None:
            pod, s = dep
            if not 0 <= s < S or not queues[s] or queues[s][0] != pod:
                raise StreamError(f"pod {pod} departs station {s} but is not at its head", t)
            queues[s].popleft()
        arr = instance.events.arrivals[t]
        if arr is not None:
            pod, s = arr
            if not 0 <= s < S:
                raise StreamError(f"unknown station {s}", t)
            if not (0 <= pod < instance.n_pods) or not in_storage[pod]:
                raise StreamError(f"pod {pod} summoned but not in storage", t)
            in_storage[pod] = False
            queues[s].append(pod)
            if len(queues[s]) > instance.queue_capacity[s]:
                raise StreamError(f"station {s} queue exceeds capacity", t)
        if dep is not None:
            in_storage[dep[0]] = True


def check_instance(instance: Instance) -> Instance:
    """Raise :class:`PRPError` unless every instance invariant holds."""
    if not isinstance(instance, Instance):
        raise TypeError(f"expected an Instance, got {type(instance).__name__}")
    L, S, P = instance.n_locations, instance.n_stations, instance.n_pods
    if S < 1:
        raise PRPError("instance needs at least one station")
    if [p.id for p in instance.pods] != list(range(P)):
        raise PRPError("pod ids must be dense and 0-based")
    if L < P:
        raise PRPError(f"{P} pods but only {L} locations")
    if len(instance.initial_config) != L:
        raise PRPError("initial_config must list every location")
    if len(instance.initial_queues) != S or len(instance.queue_capacity) != S:
        raise PRPError("initial_queues and queue_capacity need one entry per station")
    if any(c < 1 for c in instance.queue_capacity):
        raise PRPError("queue capacities must be positive")
    if (instance.layout.store_cost < 0).any():
        raise PRPError("negative travel cost")
    placed = [p for p in instance.initial_config if p is not None]
    for s, q in enumerate(instance.initial_queues):
        if len(q) > instance.queue_capacity[s]:
            raise PRPError(f"initial queue of station {s} exceeds capacity")
        placed.extend(q)
    if sorted(placed) != list(range(P)):
        raise PRPError("every pod must be in exactly one place at t=0")
    ev = instance.events
    for t, nd in enumerate(ev.next_departure):
        if nd is not None and (ev.departures[t] is None or nd <= t):
            raise PRPError(f"bad next_departure at iteration {t}")
    if tuple(ev.next_departure) != next_summons(ev.arrivals, ev.departures):
        raise PRPError("next_departure does not match the arrival stream")
    counts = np.zeros(P, dtype=np.int64)
    for a in ev.arrivals:
        if a is not None:
            if not 0 <= a[0] < P:
                raise StreamError(f"unknown pod {a[0]}")
            counts[a[0]] += 1
    if not np.array_equal(counts, instance.frequencies):
        raise PRPError("pod frequencies must equal arrival counts")
    check_stream(instance)
    return instance


def check_solution(instance: Instance, solution, complete: bool = True) -> Solution:
    if not isinstance(solution, Solution):
        solution = Solution(np.asarray(solution))
    if len(solution) != instance.horizon:
        raise IncompleteSolutionError(
            f"solution has {len(solution)} entries, instance horizon is {instance.horizon}"
        )
    if complete:
        from .feasibility import validate_solution

        report = validate_solution(instance, solution)
        if not report.ok:
            raise IncompleteSolutionError(str(report.first))
    return solution


def check_is_fitted(estimator, attributes) -> None:
    from .exceptions import NotFittedError

    if isinstance(attributes, str):
        attributes = (attributes,)
    if not all(hasattr(estimator, a) for a in attributes):
        raise NotFittedError(f"{type(estimator).__name__} is not fitted yet; call fit first")
