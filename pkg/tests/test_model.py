from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from prpkit.exceptions import IncompleteSolutionError, InstanceFormatError, PRPError
from prpkit.generators import (
    build_medium_analog,
    build_medium_instance,
    build_small_instance,
    build_tiny_instance,
)
from prpkit.io import dumps_instance, load_instance, loads_instance, save_instance
from prpkit.model import (
    EventStream,
    Instance,
    Layout,
    Pod,
    Solution,
    manhattan,
    next_summons,
    per_iteration_costs,
    placement_cost,
    solution_cost,
)
from prpkit.baselines import random_place
from prpkit.validation import check_instance, check_stream

from conftest import manhattan_raw, simulated_travel, tiny_instances

DATA = Path(__file__).parent / "data"


def line_instance(arrivals, departures, locations=((3, 0),), stations=((0, 0), (10, 0)), config=(None,), queues=None):
    n_pods = 1 + max([e[0] for e in arrivals + departures if e is not None] + [p for p in config if p is not None])
    freq = [sum(1 for a in arrivals if a is not None and a[0] == p) for p in range(n_pods)]
    return Instance(
        layout=Layout(locations, stations),
        pods=tuple(Pod(p, f) for p, f in enumerate(freq)),
        events=EventStream(arrivals, departures, next_summons(arrivals, departures)),
        initial_config=config,
        initial_queues=queues or tuple(() for _ in stations),
        queue_capacity=tuple(1 for _ in stations),
    )


@pytest.mark.parametrize("a,b,d", [((0, 0), (0, 0), 0), ((1, 2), (4, 0), 5), ((3, 3), (3, 7), 4)])
def test_manhattan(a, b, d):
    assert manhattan(a, b) == d


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=1, max_size=8),
       st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=1, max_size=3))
def test_cost_matrices_are_manhattan_and_transposed(locs, stations):
    lay = Layout(tuple(locs), tuple(stations))
    for s, sc in enumerate(stations):
        for q, lc in enumerate(locs):
            assert lay.store_cost[s, q] == manhattan_raw(sc, lc) == lay.retrieve_cost[q, s]


def test_placement_cost_store_leg_only():
    inst = line_instance([None], [(0, 0)], queues=((0,), ()))
    assert placement_cost(inst, 0, 0) == 3


def test_placement_cost_both_legs():
    inst = line_instance([None, (0, 1)], [(0, 0), None], queues=((0,), ()))
    assert placement_cost(inst, 0, 0) == 3 + 7


def test_placement_cost_requires_departure():
    inst = line_instance([None, (0, 1)], [(0, 0), None], queues=((0,), ()))
    with pytest.raises(PRPError):
        placement_cost(inst, 1, 0)


def test_placement_cost_matches_coordinates_on_small():
    inst = build_small_instance(3)
    locs, stations = inst.layout.locations, inst.layout.stations
    for t in inst.departure_times[:200]:
        pod, s = inst.events.departures[t]
        nd = inst.events.next_departure[t]
        for q in range(inst.n_locations):
            expect = manhattan_raw(stations[s], locs[q])
            if nd is not None:
                expect += manhattan_raw(locs[q], stations[inst.events.arrivals[nd][1]])
            assert placement_cost(inst, int(t), q) == expect


def test_empty_stream_costs_nothing():
    inst = build_tiny_instance(3, 3, 0, seed=0)
    assert inst.horizon == 0
    assert solution_cost(inst, Solution(np.zeros(0, dtype=np.int64))) == 0


def test_cost_is_additive_over_two_departures():
    # pod 0 returns from station x=0 to x=4 (cost 4); pod 1 from x=10 to x=4 once free (cost 6)
    inst = line_instance(
        [None, (0, 1), None],
        [(0, 0), (1, 1), (0, 1)],
        locations=((4, 0), (20, 0)),
        config=(None, None),
        queues=((0,), (1,)),
    )
    check_instance(inst)
    sol = Solution([0, 1, 0])
    costs = per_iteration_costs(inst, sol)
    assert costs.tolist() == [4 + 6, 10, 6]
    assert solution_cost(inst, sol) == sum(costs)


@given(tiny_instances(), st.integers(0, 2**31))
def test_solution_cost_equals_event_simulation(inst, seed):
    sol = random_place(inst, seed)
    assert solution_cost(inst, sol) == simulated_travel(inst, sol)


def test_solution_cost_rejects_incomplete():
    inst = build_tiny_instance(4, 3, 12, seed=1)
    sol = Solution.empty(inst)
    with pytest.raises(IncompleteSolutionError, match="unassigned"):
        solution_cost(inst, sol)


def test_small_instance_shape_and_symmetry():
    for seed in (0, 7, 42):
        inst = build_small_instance(seed)
        assert (inst.n_locations, inst.n_pods, inst.horizon) == (10, 10, 1000)
        xs = [x for x, _ in inst.layout.locations]
        mid = (min(xs) + max(xs)) / 2
        (x0, y0), (x1, y1) = inst.layout.stations
        assert y0 == y1 and x0 + x1 == 2 * mid
        check_instance(inst)


def test_small_instance_deterministic():
    assert dumps_instance(build_small_instance(42)) == dumps_instance(build_small_instance(42))
    assert dumps_instance(build_small_instance(42)) != dumps_instance(build_small_instance(43))


def test_small_instance_abc_nondegenerate():
    from prpkit.alns import classify_abc

    classes = classify_abc(build_small_instance(0).pods)
    assert set(classes) == {"A", "B", "C"}


def test_medium_instance_figures():
    inst = build_medium_instance(0)
    assert (inst.n_locations, inst.n_pods, inst.horizon) == (504, 441, 20000)
    arr = [a for a in inst.events.arrivals if a is not None]
    share = sum(1 for a in arr if a[1] == 0) / len(arr)
    assert 0.65 <= share <= 0.75
    check_instance(inst)
    assert dumps_instance(inst) == dumps_instance(build_medium_instance(0))


def test_medium_stations_asymmetric():
    inst = build_medium_instance(0)
    xs = [x for x, _ in inst.layout.locations]
    (x0, _), (x1, _) = inst.layout.stations
    assert x0 + x1 != min(xs) + max(xs)


def test_medium_analog_figures():
    inst = build_medium_analog(1)
    assert (inst.n_locations, inst.n_pods, inst.horizon) == (126, 110, 5000)
    check_instance(inst)


def test_tiny_instance_is_valid():
    check_instance(build_tiny_instance(4, 3, 12, seed=1))


def test_tiny_single_pod_single_location_forced():
    from prpkit.baselines import exact_oracle

    inst = build_tiny_instance(1, 1, 2, seed=0)
    check_instance(inst)
    res = exact_oracle(inst, prune=False)
    assert all(res.solution.assignments[t] == 0 for t in inst.departure_times)
    assert res.nodes == inst.n_decisions  # one choice per decision, nothing else to explore


def test_tiny_empty_stream():
    inst = build_tiny_instance(3, 3, 0, seed=0)
    assert inst.n_decisions == 0


def test_tiny_rejects_too_many_pods():
    with pytest.raises(PRPError):
        build_tiny_instance(2, 3, 5, seed=0)


@given(st.integers(0, 2**63 - 1))
def test_generated_streams_replay_consistently(seed):
    check_stream(build_tiny_instance(5, 4, 20, seed % 2**32))
    check_stream(build_small_instance(seed, steps=120))


def test_round_trip_small(tmp_path):
    inst = build_small_instance(5)
    path = save_instance(inst, tmp_path / "small.json")
    back = load_instance(path)
    assert back == inst
    assert dumps_instance(back) == path.read_text()


def test_truncated_file_is_rejected(tmp_path):
    text = dumps_instance(build_small_instance(5))
    with pytest.raises(InstanceFormatError):
        loads_instance(text[: len(text) // 2])


def test_schema_version_mismatch():
    text = dumps_instance(build_tiny_instance(3, 2, 5, 0)).replace('"schema_version":1', '"schema_version":99')
    with pytest.raises(InstanceFormatError, match="schema_version"):
        loads_instance(text)


def test_invariant_violation_on_load():
    text = dumps_instance(build_tiny_instance(3, 2, 8, 0))
    bad = text.replace('"pods":[{"id":0,"frequency":', '"pods":[{"id":0,"frequency":9')
    with pytest.raises(InstanceFormatError, match="invariants"):
        loads_instance(bad)


def test_golden_minimal_file():
    inst = load_instance(DATA / "minimal_instance.json")
    assert (inst.n_locations, inst.n_pods, inst.horizon) == (1, 1, 4)
    sol = Solution([-1, 0, -1, 0])
    # store 1 + retrieve 1 at t=1, store 1 at t=3
    assert solution_cost(inst, sol) == 3


def test_stream_error_names_iteration():
    from prpkit.exceptions import StreamError

    inst = line_instance([None, None], [(0, 0), (0, 0)], queues=((0,), ()))
    with pytest.raises(StreamError) as err:
        check_stream(inst)
    assert err.value.iteration == 1
