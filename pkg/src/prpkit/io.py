"""JSON (de)serialisation of instances and solutions."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import InstanceFormatError, PRPError
from .model import EventStream, Instance, Layout, Pod, Solution

SCHEMA_VERSION = 1

_INSTANCE_KEYS = (
    "schema_version",
    "name",
    "seed",
    "layout",
    "pods",
    "queue_capacity",
    "initial_config",
    "initial_queues",
    "arrivals",
    "departures",
    "next_departure",
)


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def instance_to_dict(instance: Instance) -> dict:
    ev = instance.events
    return {
        "schema_version": SCHEMA_VERSION,
        "name": instance.name,
        "seed": instance.seed,
        "layout": {
            "locations": [{"id": i, "x": x, "y": y} for i, (x, y) in enumerate(instance.layout.locations)],
            "stations": [{"id": i, "x": x, "y": y} for i, (x, y) in enumerate(instance.layout.stations)],
        },
        "pods": [{"id": p.id, "frequency": p.frequency} for p in instance.pods],
        "queue_capacity": list(instance.queue_capacity),
        "initial_config": list(instance.initial_config),
        "initial_queues": [list(q) for q in instance.initial_queues],
        "arrivals": [None if a is None else list(a) for a in ev.arrivals],
        "departures": [None if d is None else list(d) for d in ev.departures],
        "next_departure": list(ev.next_departure),
    }


def instance_from_dict(doc: dict, validate: bool = True) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InstanceFormatError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    missing = [k for k in _INSTANCE_KEYS if k not in doc]
    if missing:
        raise InstanceFormatError(f"missing fields: {', '.join(missing)}")
    try:
        locs = sorted(doc["layout"]["locations"], key=lambda r: r["id"])
        stations = sorted(doc["layout"]["stations"], key=lambda r: r["id"])
        if [r["id"] for r in locs] != list(range(len(locs))) or [r["id"] for r in stations] != list(
            range(len(stations))
        ):
            raise InstanceFormatError("location and station ids must be dense and 0-based")
        layout = Layout(tuple((r["x"], r["y"]) for r in locs), tuple((r["x"], r["y"]) for r in stations))
        pods = tuple(Pod(int(r["id"]), int(r["frequency"])) for r in sorted(doc["pods"], key=lambda r: r["id"]))
        events = EventStream(
            tuple(None if a is None else tuple(a) for a in doc["arrivals"]),
            tuple(None if d is None else tuple(d) for d in doc["departures"]),
            tuple(doc["next_departure"]),
        )
        inst = Instance(
            layout=layout,
            pods=pods,
            events=events,
            initial_config=tuple(doc["initial_config"]),
            initial_queues=tuple(tuple(q) for q in doc["initial_queues"]),
            queue_capacity=tuple(doc["queue_capacity"]),
            name=str(doc["name"]),
            seed=doc["seed"],
        )
    except InstanceFormatError:
        raise
    except (KeyError, TypeError, ValueError, PRPError) as exc:
        raise InstanceFormatError(f"malformed instance document: {exc}") from exc
    if validate:
        from .validation import check_instance

        try:
            check_instance(inst)
        except PRPError as exc:
            raise InstanceFormatError(f"instance violates invariants: {exc}") from exc
    return inst


def dumps_instance(instance: Instance) -> str:
    return _dump(instance_to_dict(instance))


def loads_instance(text: str, validate: bool = True) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"not a valid instance document: {exc}") from exc
    return instance_from_dict(doc, validate=validate)


def save_instance(instance: Instance, path) -> Path:
    path = Path(path)
    path.write_text(dumps_instance(instance))
    return path


def load_instance(path, validate: bool = True) -> Instance:
    return loads_instance(Path(path).read_text(), validate=validate)


def solution_to_dict(instance: Instance, solution: Solution, total_cost=None) -> dict:
    dep = instance._arrays["dep_pod"]
    assignments = [int(q) if (dep[t] >= 0 and q >= 0) else None for t, q in enumerate(solution.assignments)]
    if total_cost is None:
        from .model import solution_cost

        total_cost = solution_cost(instance, solution)
    return {"instance_name": instance.name, "assignments": assignments, "total_cost": int(total_cost)}


def save_solution(instance: Instance, solution: Solution, path, total_cost=None) -> Path:
    path = Path(path)
    path.write_text(_dump(solution_to_dict(instance, solution, total_cost)))
    return path


def load_solution(path) -> tuple[Solution, dict]:
    """Returns the solution and the raw document (``instance_name``, ``total_cost``)."""
    try:
        doc = json.loads(Path(path).read_text())
        a = np.array([-1 if q is None else int(q) for q in doc["assignments"]], dtype=np.int64)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"not a valid solution document: {exc}") from exc
    return Solution(a), doc
