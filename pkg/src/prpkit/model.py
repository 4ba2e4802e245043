"""Instances, solutions and the cost model for the pod repositioning problem.

Time is discrete. At every iteration ``t`` at most one pod *departs* a station
queue and needs a storage location, and at most one pod is *summoned* from
storage to a station queue (an arrival). Within an iteration the departure is
handled first, then the arrival. A pod stored at iteration ``t`` whose next
summon happens at ``d`` therefore occupies its location for every iteration in
the closed range ``[t, d]``; a pod that is never summoned again keeps the
location until the end of the horizon.

The cost of storing the pod returning at ``t`` in location ``q`` bundles the
store leg (origin station -> q) and, if the pod is summoned again, the retrieve
leg (q -> next station). Summing these per-iteration costs gives the total
travel cost of a solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .exceptions import IncompleteSolutionError, PRPError

Coord = tuple[int, int]
Event = Optional[tuple[int, int]]

UNASSIGNED = -1


def manhattan(a: Coord, b: Coord) -> int:
    return abs(int(a[0]) - int(b[0])) + abs(int(a[1]) - int(b[1]))


@dataclass(frozen=True)
class Layout:
    """Storage locations and pick stations on an integer grid.

    Location and station ids are their positions in ``locations`` and
    ``stations``. Costs are Manhattan distances and do not depend on the pod
    or the time.
    """

    locations: tuple[Coord, ...]
    stations: tuple[Coord, ...]

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple((int(x), int(y)) for x, y in self.locations))
        object.__setattr__(self, "stations", tuple((int(x), int(y)) for x, y in self.stations))

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @cached_property
    def store_cost(self) -> np.ndarray:
        """``store_cost[s, q]``: travel from station ``s`` to location ``q``."""
        st = np.asarray(self.stations, dtype=np.int64).reshape(-1, 2)
        loc = np.asarray(self.locations, dtype=np.int64).reshape(-1, 2)
        cost = np.abs(st[:, None, :] - loc[None, :, :]).sum(axis=2)
        cost.setflags(write=False)
        return cost

    @cached_property
    def retrieve_cost(self) -> np.ndarray:
        """``retrieve_cost[q, s]``: travel from location ``q`` to station ``s``."""
        cost = np.ascontiguousarray(self.store_cost.T)
        cost.setflags(write=False)
        return cost


@dataclass(frozen=True)
class Pod:
    id: int
    frequency: int


@dataclass(frozen=True)
class EventStream:
    """Per-iteration arrivals and departures.

    ``arrivals[t]`` is ``(pod, station)`` when a pod is summoned from storage to
    ``station`` at ``t``. ``departures[t]`` is ``(pod, station)`` when a pod
    leaves ``station`` at ``t`` and must be stored. ``next_departure[t]`` is the
    next iteration at which the pod departing at ``t`` is summoned again, or
    ``None``.
    """

    arrivals: tuple[Event, ...]
    departures: tuple[Event, ...]
    next_departure: tuple[Optional[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "arrivals", tuple(_event(e) for e in self.arrivals))
        object.__setattr__(self, "departures", tuple(_event(e) for e in self.departures))
        object.__setattr__(
            self, "next_departure", tuple(None if d is None else int(d) for d in self.next_departure)
        )
        if not len(self.arrivals) == len(self.departures) == len(self.next_departure):
            raise PRPError("arrivals, departures and next_departure must have equal length")

    @property
    def horizon(self) -> int:
        return len(self.arrivals)


def _event(e) -> Event:
    if e is None:
        return None
    pod, station = e
    return (int(pod), int(station))


def next_summons(arrivals: Sequence[Event], departures: Sequence[Event]) -> tuple[Optional[int], ...]:
    """For every departure, the iteration of that pod's next arrival (or None)."""
    nxt: list[Optional[int]] = [None] * len(arrivals)
    upcoming: dict[int, int] = {}
    for t in range(len(arrivals) - 1, -1, -1):
        if departures[t] is not None:
            nxt[t] = upcoming.get(departures[t][0])
        if arrivals[t] is not None:
            upcoming[arrivals[t][0]] = t
    return tuple(nxt)


@dataclass(frozen=True)
class Instance:
    """An immutable problem instance.

    ``initial_config[q]`` holds the pod stored at location ``q`` at ``t = 0``
    (or ``None``). ``initial_queues[s]`` lists the pods queued at station ``s``,
    head first.
    """

    layout: Layout
    pods: tuple[Pod, ...]
    events: EventStream
    initial_config: tuple[Optional[int], ...]
    initial_queues: tuple[tuple[int, ...], ...]
    queue_capacity: tuple[int, ...]
    name: str = "instance"
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "pods", tuple(self.pods))
        object.__setattr__(
            self, "initial_config", tuple(None if p is None else int(p) for p in self.initial_config)
        )
        object.__setattr__(self, "initial_queues", tuple(tuple(int(p) for p in q) for q in self.initial_queues))
        object.__setattr__(self, "queue_capacity", tuple(int(c) for c in self.queue_capacity))

    # -- sizes ---------------------------------------------------------------
    @property
    def horizon(self) -> int:
        return self.events.horizon

    @property
    def n_locations(self) -> int:
        return self.layout.n_locations

    @property
    def n_stations(self) -> int:
        return self.layout.n_stations

    @property
    def n_pods(self) -> int:
        return len(self.pods)

    @cached_property
    def frequencies(self) -> np.ndarray:
        f = np.array([p.frequency for p in self.pods], dtype=np.int64)
        f.setflags(write=False)
        return f

    # -- per-iteration arrays -------------------------------------------------
    @cached_property
    def _arrays(self) -> dict:
        n = self.horizon
        dep_pod = np.full(n, -1, dtype=np.int64)
        dep_station = np.full(n, -1, dtype=np.int64)
        arr_pod = np.full(n, -1, dtype=np.int64)
        arr_station = np.full(n, -1, dtype=np.int64)
        next_dep = np.full(n, -1, dtype=np.int64)
        for t, (a, d, nd) in enumerate(zip(self.events.arrivals, self.events.departures, self.events.next_departure)):
            if a is not None:
                arr_pod[t], arr_station[t] = a
            if d is not None:
                dep_pod[t], dep_station[t] = d
            if nd is not None:
                next_dep[t] = nd
        next_station = np.where(next_dep >= 0, arr_station[np.maximum(next_dep, 0)], -1)
        next_station[dep_pod < 0] = -1
        # last iteration (inclusive) at which a pod stored at t still occupies its slot
        dwell_end = np.where(next_dep >= 0, next_dep, n - 1)
        out = dict(
            dep_pod=dep_pod,
            dep_station=dep_station,
            arr_pod=arr_pod,
            arr_station=arr_station,
            next_dep=next_dep,
            next_station=next_station,
            dwell_end=dwell_end,
            departure_times=np.flatnonzero(dep_pod >= 0),
        )
        for v in out.values():
            v.setflags(write=False)
        return out

    @property
    def departure_times(self) -> np.ndarray:
        """Sorted iterations that carry a departure (the decision points)."""
        return self._arrays["departure_times"]

    @property
    def n_decisions(self) -> int:
        return len(self.departure_times)

    def departing_pod(self, t: int) -> int:
        return int(self._arrays["dep_pod"][t])

    @cached_property
    def cost_table(self) -> np.ndarray:
        """``cost_table[s_from, s_next, q]`` with ``s_next == n_stations`` meaning no retrieval."""
        store = self.layout.store_cost
        S, L = store.shape
        table = np.empty((S, S + 1, L), dtype=np.int64)
        for s in range(S):
            table[s, :S] = store[s][None, :] + self.layout.retrieve_cost.T
            table[s, S] = store[s]
        table.setflags(write=False)
        return table

    def cost_row(self, t: int) -> np.ndarray:
        """Placement cost of every location for the pod departing at ``t``."""
        a = self._arrays
        s_from = a["dep_station"][t]
        if s_from < 0:
            raise PRPError(f"iteration {t} has no departure")
        s_next = a["next_station"][t]
        return self.cost_table[s_from, s_next if s_next >= 0 else self.n_stations]

    @cached_property
    def initial_intervals(self) -> tuple[tuple[int, int], ...]:
        """``(location, last occupied iteration)`` for every pod stored at t=0."""
        first_arrival: dict[int, int] = {}
        for t, a in enumerate(self.events.arrivals):
            if a is not None and a[0] not in first_arrival:
                first_arrival[a[0]] = t
        out = []
        for q, p in enumerate(self.initial_config):
            if p is not None:
                out.append((q, first_arrival.get(p, self.horizon - 1)))
        return tuple(out)


def placement_cost(instance: Instance, t: int, q: int) -> int:
    """Store leg from the origin station plus retrieve leg to the next station."""
    if not 0 <= q < instance.n_locations:
        raise PRPError(f"location {q} out of range")
    if not 0 <= t < instance.horizon:
        raise PRPError(f"iteration {t} out of range")
    return int(instance.cost_row(t)[q])


@dataclass(eq=False)
class Solution:
    """Storage decisions, one entry per iteration (``-1`` where nothing is stored).

    Entries at departure iterations may be ``-1`` while a solution is partial.
    """

    assignments: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64).copy()

    @classmethod
    def empty(cls, instance: Instance) -> "Solution":
        return cls(np.full(instance.horizon, UNASSIGNED, dtype=np.int64))

    def copy(self) -> "Solution":
        return Solution(self.assignments.copy(), dict(self.meta))

    def __eq__(self, other):
        if not isinstance(other, Solution):
            return NotImplemented
        return np.array_equal(self.assignments, other.assignments)

    def __len__(self):
        return len(self.assignments)

    def unassigned(self, instance: Instance) -> np.ndarray:
        dt = instance.departure_times
        return dt[self.assignments[dt] < 0]

    def is_complete(self, instance: Instance) -> bool:
        return len(self.unassigned(instance)) == 0


def per_iteration_costs(instance: Instance, solution: Solution) -> np.ndarray:
    """Placement cost per iteration; zero where nothing is (yet) stored."""
    a = solution.assignments
    costs = np.zeros(instance.horizon, dtype=np.int64)
    for t in instance.departure_times:
        if a[t] >= 0:
            costs[t] = instance.cost_row(t)[a[t]]
    return costs


def solution_cost(instance: Instance, solution: Solution, check: bool = True) -> int:
    """Total travel cost of a complete solution.

    With ``check`` the solution is validated first and
    :class:`IncompleteSolutionError` names the first bad iteration.
    """
    if len(solution) != instance.horizon:
        raise IncompleteSolutionError(
            f"solution has {len(solution)} entries, instance horizon is {instance.horizon}"
        )
    if check:
        from .feasibility import validate_solution

        report = validate_solution(instance, solution)
        if not report.ok:
            raise IncompleteSolutionError(str(report.first))
    return int(per_iteration_costs(instance, solution).sum())
