"""Warehouse state reconstruction and feasible placements.

Two routes answer "where may the pod returning at ``t`` go?":

* the replay route (:func:`recall_places`, :func:`is_place_feasible`,
  :func:`feasible_locations`) rebuilds the warehouse from ``t = 0`` on every
  call. It is slow and exists as the readable reference.
* :class:`OccupancyIndex` keeps a time x location occupancy matrix so a whole
  feasible set is one vectorised range query. The search operators use this.

``destroy_set`` always denotes the iterations whose decisions are pending;
assignments at those iterations are ignored.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .exceptions import StreamError
from .model import Instance, Solution


@dataclass(frozen=True)
class WarehouseConfig:
    """Snapshot of storage and station queues at the start of ``iteration``.

    ``unplaced`` holds pods that left a station at a pending iteration and so
    have no storage location in this snapshot.
    """

    occupancy: tuple
    station_queues: tuple
    iteration: int
    unplaced: frozenset = frozenset()

    def is_occupied(self, q: int) -> bool:
        return self.occupancy[q] is not None

    def location_of(self, pod: int) -> Optional[int]:
        for q, p in enumerate(self.occupancy):
            if p == pod:
                return q
        return None


@dataclass(frozen=True, order=True)
class CostedPlacement:
    cost: int
    location: int


def initial_warehouse(instance: Instance) -> WarehouseConfig:
    return WarehouseConfig(
        occupancy=tuple(instance.initial_config),
        station_queues=tuple(tuple(q) for q in instance.initial_queues),
        iteration=0,
    )


def step_warehouse(instance: Instance, solution: Solution, config: WarehouseConfig):
    """Apply the departure then the arrival of ``config.iteration``.

    Returns ``(next_config, vacated)`` where ``vacated`` is ``(pod, location)``
    for a pod summoned out of storage, else ``None``.
    """
    t = config.iteration
    occupancy = list(config.occupancy)
    queues = [deque(q) for q in config.station_queues]
    unplaced = set(config.unplaced)
    dep = instance.events.departures[t]
    if dep is not None:
        pod, s = dep
        if not queues[s] or queues[s][0] != pod:
            raise StreamError(f"pod {pod} departs station {s} but is not at its head", t)
        queues[s].popleft()
        q = int(solution.assignments[t])
        if q >= 0:
            occupancy[q] = pod
        else:
            unplaced.add(pod)
    vacated = None
    arr = instance.events.arrivals[t]
    if arr is not None:
        pod, s = arr
        if pod in unplaced:
            unplaced.discard(pod)
        else:
            try:
                q = occupancy.index(pod)
            except ValueError:
                raise StreamError(f"pod {pod} summoned to station {s} but is not in storage", t) from None
            occupancy[q] = None
            vacated = (pod, q)
        queues[s].append(pod)
        if len(queues[s]) > instance.queue_capacity[s]:
            raise StreamError(f"station {s} queue exceeds capacity", t)
    nxt = WarehouseConfig(
        occupancy=tuple(occupancy),
        station_queues=tuple(tuple(q) for q in queues),
        iteration=t + 1,
        unplaced=frozenset(unplaced),
    )
    return nxt, vacated


def recall_places(instance: Instance, solution: Solution, iteration: int, target_pod: Optional[int] = None):
    """Replay iterations ``0 .. iteration-1`` and return the state at ``iteration``.

    Returns ``(config, prev_location, station_queues)``; ``prev_location`` is
    the storage location ``target_pod`` left at its most recent summon.
    """
    if not 0 <= iteration <= instance.horizon:
        raise ValueError(f"iteration {iteration} outside [0, {instance.horizon}]")
    config = initial_warehouse(instance)
    prev_location = None
    for _ in range(iteration):
        config, vacated = step_warehouse(instance, solution, config)
        if vacated is not None and vacated[0] == target_pod:
            prev_location = vacated[1]
    return config, prev_location, config.station_queues


def is_place_feasible(
    config: WarehouseConfig,
    solution: Solution,
    iteration: int,
    place: int,
    next_departure: Optional[int],
    destroy_set: Iterable[int] = (),
) -> bool:
    if config.occupancy[place] is not None:
        return False
    pending = destroy_set if isinstance(destroy_set, (set, frozenset)) else set(destroy_set)
    a = solution.assignments
    # the stored pod is still in place during the iteration it is summoned
    last = len(a) - 1 if next_departure is None else next_departure
    for j in range(iteration + 1, last + 1):
        if a[j] == place and j not in pending:
            return False
    return True


def feasible_locations(instance: Instance, solution: Solution, destroy_set, iteration: int):
    """Feasible, costed placements for the pod departing at ``iteration``.

    Sorted by ``(cost, location)``. Returns ``(placements, prev_location)``.
    """
    dep = instance.events.departures[iteration]
    if dep is None:
        raise ValueError(f"iteration {iteration} has no departure")
    pod = dep[0]
    t_next = instance.events.next_departure[iteration]
    config, prev_loc, _ = recall_places(instance, solution, iteration, pod)
    pending = set(destroy_set)
    costs = instance.cost_row(iteration)
    out = [
        CostedPlacement(int(costs[q]), q)
        for q in range(instance.n_locations)
        if is_place_feasible(config, solution, iteration, q, t_next, pending)
    ]
    out.sort()
    return out, prev_loc


@dataclass(frozen=True)
class Violation:
    iteration: int
    kind: str  # "unassigned" | "overlap" | "out_of_range"
    location: Optional[int] = None
    pods: tuple = ()

    def __str__(self):
        parts = [f"iteration={self.iteration}", f"kind={self.kind}"]
        if self.location is not None:
            parts.append(f"location={self.location}")
        if self.pods:
            parts.append("pods=" + ",".join(map(str, self.pods)))
        return " ".join(parts)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Optional[Violation]:
        return self.violations[0] if self.violations else None

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "ok" if self.ok else "\n".join(map(str, self.violations))


def validate_solution(instance: Instance, solution: Solution, allow_unassigned: bool = False) -> ValidationReport:
    """Replay the whole horizon and report placement violations.

    Every violation is reported in time order; ``report.first`` is the earliest.
    With ``allow_unassigned`` pending decisions are skipped rather than flagged,
    which validates only the fixed part of a partial solution.
    """
    report = ValidationReport()
    if len(solution) != instance.horizon:
        report.violations.append(Violation(0, "length_mismatch"))
        return report
    a = solution.assignments
    occupants: list[set] = [set() for _ in range(instance.n_locations)]
    where: dict[int, int] = {}
    for q, p in enumerate(instance.initial_config):
        if p is not None:
            occupants[q].add(p)
            where[p] = q
    for t in range(instance.horizon):
        dep = instance.events.departures[t]
        if dep is not None:
            pod = dep[0]
            q = int(a[t])
            if q < 0:
                if not allow_unassigned:
                    report.violations.append(Violation(t, "unassigned", None, (pod,)))
            elif q >= instance.n_locations:
                report.violations.append(Violation(t, "out_of_range", q, (pod,)))
            else:
                if occupants[q]:
                    report.violations.append(Violation(t, "overlap", q, tuple(sorted(occupants[q])) + (pod,)))
                occupants[q].add(pod)
                where[pod] = q
        elif a[t] >= 0:
            report.violations.append(Violation(t, "out_of_range", int(a[t]), ()))
        arr = instance.events.arrivals[t]
        if arr is not None:
            q = where.pop(arr[0], None)
            if q is not None:
                occupants[q].discard(arr[0])
    return report


class OccupancyIndex:
    """Time x location occupancy counts for fast feasibility queries.

    ``occ[x, q]`` counts pods stored at ``q`` during iteration ``x``. A stored
    pod covers ``[t, dwell_end[t]]``. Placing the pod departing at ``t`` into
    ``q`` is feasible iff that column range is all zero.
    """

    def __init__(self, instance: Instance, assignments: Optional[np.ndarray] = None):
        self.instance = instance
        self._dwell_end = instance._arrays["dwell_end"]
        self.occ = np.zeros((instance.horizon, instance.n_locations), dtype=np.uint8)
        for q, end in instance.initial_intervals:
            self.occ[: end + 1, q] += 1
        if assignments is not None:
            for t in instance.departure_times:
                q = assignments[t]
                if q >= 0:
                    self.add(int(t), int(q))

    def copy(self) -> "OccupancyIndex":
        new = OccupancyIndex.__new__(OccupancyIndex)
        new.instance = self.instance
        new._dwell_end = self._dwell_end
        new.occ = self.occ.copy()
        return new

    def add(self, t: int, q: int):
        self.occ[t : self._dwell_end[t] + 1, q] += 1

    def remove(self, t: int, q: int):
        self.occ[t : self._dwell_end[t] + 1, q] -= 1

    def free_mask(self, t: int) -> np.ndarray:
        return ~self.occ[t : self._dwell_end[t] + 1].any(axis=0)

    def feasible(self, t: int):
        """``(locations, costs)`` sorted ascending by ``(cost, location)``."""
        locs = np.flatnonzero(self.free_mask(t))
        costs = self.instance.cost_row(t)[locs]
        order = np.lexsort((locs, costs))
        return locs[order], costs[order]

    def config_at(self, t: int) -> np.ndarray:
        """Boolean mask of locations holding a pod during iteration ``t``."""
        return self.occ[t] > 0
