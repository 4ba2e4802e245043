import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from prpkit.feasibility import validate_solution
from prpkit.generators import build_tiny_instance
from prpkit.model import Solution

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def tiny_instances(draw, max_locations=6, max_steps=20):
    n_loc = draw(st.integers(1, max_locations))
    n_pods = draw(st.integers(1, n_loc))
    steps = draw(st.integers(0, max_steps))
    seed = draw(st.integers(0, 2**32 - 1))
    return build_tiny_instance(n_loc, n_pods, steps, seed)


def oracle_scale_instances(n=100, seed=2024):
    """Uniform draw over 2..5 locations, 1..L pods and 4..16 steps."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        n_loc = int(rng.integers(2, 6))
        n_pods = int(rng.integers(1, n_loc + 1))
        steps = int(rng.integers(4, 17))
        out.append(build_tiny_instance(n_loc, n_pods, steps, seed=int(rng.integers(2**31))))
    return out


def manhattan_raw(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def simulated_travel(instance, solution):
    """Walk the event stream and add up every robot trip the solution causes.

    Each returning pod is carried station -> location. Its next summon is
    charged as location -> station. Initial placements are free.
    """
    locs, stations = instance.layout.locations, instance.layout.stations
    where = {p: None for p in range(instance.n_pods)}
    total = 0
    for t in range(instance.horizon):
        dep = instance.events.departures[t]
        if dep is not None:
            pod, s = dep
            q = int(solution.assignments[t])
            total += manhattan_raw(stations[s], locs[q])
            where[pod] = q
        arr = instance.events.arrivals[t]
        if arr is not None:
            pod, s = arr
            if where.get(pod) is not None:
                total += manhattan_raw(locs[where[pod]], stations[s])
            where[pod] = None
    return total


def replay_occupancy(instance, solution, upto):
    """Storage contents at the start of iteration ``upto`` (list of pod-or-None)."""
    occ = list(instance.initial_config)
    for t in range(upto):
        dep = instance.events.departures[t]
        if dep is not None and solution.assignments[t] >= 0:
            occ[int(solution.assignments[t])] = dep[0]
        arr = instance.events.arrivals[t]
        if arr is not None and arr[0] in occ:
            occ[occ.index(arr[0])] = None
    return occ


def commit_and_validate(instance, assignments, t):
    """Locations ``q`` such that fixing ``a[t] = q`` keeps the fixed part valid."""
    ok = []
    for q in range(instance.n_locations):
        trial = np.array(assignments, copy=True)
        trial[t] = q
        if validate_solution(instance, Solution(trial), allow_unassigned=True).ok:
            ok.append(q)
    return ok


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gradient_check(seed, hidden=(16, 16), batch=12, eps=1e-6):
    """Relative error between the analytic PPO gradient and central differences."""
    from prpkit.drl import init_policy, ppo_loss

    rng = np.random.default_rng(seed)
    params = init_policy(13, 24, hidden, rng)
    # move away from the tiny-gain head so every path carries signal
    params.flat += 0.3 * rng.standard_normal(params.size)
    obs = rng.standard_normal((batch, 13))
    actions = rng.integers(0, 24, batch)
    old_logp = np.log(rng.uniform(0.02, 0.08, batch))
    adv = rng.standard_normal(batch)
    ret = rng.standard_normal(batch)

    def loss(flat):
        p = params.copy()
        p.flat[:] = flat
        return ppo_loss(p, obs, actions, old_logp, adv, ret, need_grad=False)[0].total

    _, grad = ppo_loss(params, obs, actions, old_logp, adv, ret)
    fd = np.empty_like(grad)
    base = params.flat.copy()
    for i in range(base.size):
        up, down = base.copy(), base.copy()
        up[i] += eps
        down[i] -= eps
        fd[i] = (loss(up) - loss(down)) / (2 * eps)
    return float(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12))


ACCEPTANCE_LINES = {}


def report(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
