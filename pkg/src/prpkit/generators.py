"""Seeded instance generators.

All families share one queue simulation: at every iteration a station is drawn,
the head of its queue departs if the queue is full, and then a stored pod is
summoned to that station (drawn by pod weight). A pod returning at ``t`` can
be summoned again from ``t + 1`` on.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .exceptions import PRPError
from .model import EventStream, Instance, Layout, Pod, next_summons

SMALL_POD_WEIGHTS = (0.35, 0.20, 0.15, 0.10, 0.07, 0.05, 0.03, 0.02, 0.02, 0.01)


def slotted_config(layout: Layout, pod_weights) -> list:
    """Busiest pods in the locations with the smallest summed station distance."""
    dist = layout.store_cost.sum(axis=0)
    ids = np.arange(layout.n_locations)
    ranked = ids[np.lexsort((ids, dist))]
    pods = np.argsort(-np.asarray(pod_weights, dtype=float), kind="stable")
    config = [None] * layout.n_locations
    for p, q in zip(pods, ranked):
        config[int(q)] = int(p)
    return config


def random_config(rng, n_locations: int, n_pods: int) -> list:
    config = [None] * n_locations
    for p, q in enumerate(rng.permutation(n_locations)[:n_pods]):
        config[int(q)] = p
    return config


def _simulate(rng, initial_config, n_pods, steps, pod_weights, station_weights, capacity):
    pod_weights = np.asarray(pod_weights, dtype=float)
    station_weights = np.asarray(station_weights, dtype=float)
    station_weights = station_weights / station_weights.sum()
    n_stations = len(station_weights)

    in_storage = np.zeros(n_pods, dtype=bool)
    for p in initial_config:
        if p is not None:
            in_storage[p] = True
    queues = [deque() for _ in range(n_stations)]
    arrivals, departures = [], []
    for _ in range(steps):
        s = int(rng.choice(n_stations, p=station_weights))
        candidates = np.flatnonzero(in_storage)
        if len(candidates) == 0 and len(queues[s]) < capacity[s]:
            full = [i for i in range(n_stations) if len(queues[i]) >= capacity[i]]
            if full:
                s = full[0]
        dep = None
        if len(queues[s]) >= capacity[s]:
            dep = (queues[s].popleft(), s)
        arr = None
        if len(candidates):
            w = pod_weights[candidates]
            p = int(rng.choice(candidates, p=w / w.sum()))
            in_storage[p] = False
            queues[s].append(p)
            arr = (p, s)
        if dep is not None:
            in_storage[dep[0]] = True
        arrivals.append(arr)
        departures.append(dep)
    return list(initial_config), arrivals, departures


def _assemble(name, seed, layout, n_pods, initial_config, arrivals, departures, capacity):
    freq = np.zeros(n_pods, dtype=np.int64)
    for a in arrivals:
        if a is not None:
            freq[a[0]] += 1
    events = EventStream(tuple(arrivals), tuple(departures), next_summons(arrivals, departures))
    return Instance(
        layout=layout,
        pods=tuple(Pod(i, int(f)) for i, f in enumerate(freq)),
        events=events,
        initial_config=tuple(initial_config),
        initial_queues=tuple(() for _ in layout.stations),
        queue_capacity=tuple(capacity),
        name=name,
        seed=seed,
    )


def line_layout(n_locations: int, inset: int = None) -> Layout:
    """Locations at x = 0..n-1 on the line y = 1 with two mirrored stations at y = 0.

    The stations sit ``inset`` slots in from either end (default: a fifth of
    the line), so they mirror each other about the line's midpoint.
    """
    if inset is None:
        inset = n_locations // 5
    return Layout(
        locations=tuple((x, 1) for x in range(n_locations)),
        stations=((inset, 0), (n_locations - 1 - inset, 0)),
    )


def grid_layout(rows: int, cols: int, station_columns) -> Layout:
    """``rows x cols`` storage grid above a station edge at ``y = 0``."""
    return Layout(
        locations=tuple((x, y) for y in range(1, rows + 1) for x in range(cols)),
        stations=tuple((int(c), 0) for c in station_columns),
    )


def build_small_instance(seed: int = 0, steps: int = 1000, queue_capacity: int = 3) -> Instance:
    """10 locations on a line served by two mirrored stations, 10 pods.

    The warehouse starts slotted by demand and station requests are split 50/50.
    """
    rng = np.random.default_rng(seed)
    layout = line_layout(10)
    capacity = (queue_capacity, queue_capacity)
    config = slotted_config(layout, SMALL_POD_WEIGHTS)
    init, arr, dep = _simulate(rng, config, 10, steps, SMALL_POD_WEIGHTS, (0.5, 0.5), capacity)
    return _assemble(f"small-{seed}", seed, layout, 10, init, arr, dep, capacity)


def build_grid_instance(
    rows: int,
    cols: int,
    n_pods: int,
    steps: int,
    seed: int,
    station_columns=None,
    station_bias: float = 0.7,
    zipf_exponent: float = 1.0,
    queue_capacity: int = 3,
    name: str = None,
) -> Instance:
    """Grid warehouse with two asymmetric stations and Zipf-like pod demand.

    Pod ``i`` is requested with weight ``1 / (i + 1) ** zipf_exponent`` and the
    first station receives ``station_bias`` of the requests.
    """
    n_locations = rows * cols
    if n_pods > n_locations:
        raise PRPError("more pods than locations")
    if station_columns is None:
        station_columns = (cols // 6, (cols * 3) // 5)
    rng = np.random.default_rng(seed)
    layout = grid_layout(rows, cols, station_columns)
    weights = 1.0 / np.arange(1, n_pods + 1) ** zipf_exponent
    capacity = (queue_capacity, queue_capacity)
    config = slotted_config(layout, weights)
    init, arr, dep = _simulate(rng, config, n_pods, steps, weights, (station_bias, 1.0 - station_bias), capacity)
    return _assemble(name or f"grid-{rows}x{cols}-{seed}", seed, layout, n_pods, init, arr, dep, capacity)


def build_medium_instance(seed: int = 0, steps: int = 20000) -> Instance:
    """504 locations (21 x 24 grid), 441 pods, stations biased 70/30."""
    return build_grid_instance(21, 24, 441, steps, seed, station_columns=(4, 14), name=f"medium-{seed}")


def build_medium_analog(seed: int = 0, steps: int = 5000) -> Instance:
    """Scaled-down medium family: 126 locations (9 x 14), 110 pods."""
    return build_grid_instance(9, 14, 110, steps, seed, station_columns=(2, 8), name=f"medium-analog-{seed}")


def build_tiny_instance(n_locations: int, n_pods: int, steps: int, seed: int = 0) -> Instance:
    """Oracle-scale instance on a line with two unit-capacity stations.

    Pod weights and the initial layout are random; nothing is slotted.
    """
    if n_locations < 1 or n_pods < 1 or steps < 0:
        raise PRPError("need at least one location and one pod, and steps >= 0")
    if n_pods > n_locations:
        raise PRPError(f"{n_pods} pods do not fit into {n_locations} locations")
    rng = np.random.default_rng(seed)
    layout = line_layout(n_locations)
    weights = rng.uniform(0.2, 1.0, size=n_pods)
    capacity = (1, 1)
    config = random_config(rng, n_locations, n_pods)
    init, arr, dep = _simulate(rng, config, n_pods, steps, weights, (0.5, 0.5), capacity)
    return _assemble(f"tiny-{n_locations}-{n_pods}-{steps}-{seed}", seed, layout, n_pods, init, arr, dep, capacity)
