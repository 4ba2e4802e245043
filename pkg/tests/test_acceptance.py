"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary
(and on stdout with ``pytest -s``).
"""

import math
import time

import numpy as np
import pytest

from prpkit.alns import SAParams, removal_count, run_alns, sa_accept, update_weight
from prpkit.baselines import exact_oracle, random_place
from prpkit.drl import EpisodeConfig, compute_reward, decode_action, encode_action, infer, step_score, train
from prpkit.experiments import compare, run_method
from prpkit.feasibility import OccupancyIndex, feasible_locations, validate_solution
from prpkit.generators import build_medium_analog, build_small_instance, build_tiny_instance
from prpkit.model import Solution, solution_cost

from conftest import commit_and_validate, gradient_check, oracle_scale_instances, report

pytestmark = pytest.mark.slow

TUNED = {"t_start": 12.5, "t_stop": 0.1, "chain_length": 30, "alpha": 0.95}


@pytest.fixture(scope="module")
def small():
    return build_small_instance(0)


@pytest.fixture(scope="module")
def medium():
    return build_medium_analog(0)


@pytest.fixture(scope="module")
def small_training(small):
    t0 = time.perf_counter()
    res = train(small, total_timesteps=20000, seed=0)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def medium_policy(medium):
    return train(medium, total_timesteps=20000, seed=0).policy


# --------------------------------------------------------------------------
def test_c01_feasibility_suite(small_training):
    t0 = time.perf_counter()
    policy = small_training[0].policy
    pairs = failures = checked = 0
    plain = ("random_place", "cheapest_place", "fixed_place", "fixed_place_approx", "tetris")

    def check(inst, sol):
        nonlocal failures, checked
        checked += 1
        failures += not validate_solution(inst, sol).ok

    jobs = [(build_tiny_instance(5, 4, 16, s), True) for s in range(80)]
    jobs += [(build_small_instance(s), False) for s in range(52)]
    for k, (inst, tiny) in enumerate(jobs):
        for m in plain:
            check(inst, run_method(inst, m, k)[0])
            pairs += 1
        if tiny:
            check(inst, exact_oracle(inst).solution)
            pairs += 1
        hook = lambda it, state, inst=inst: check(inst, state.to_solution())
        check(inst, run_alns(inst, rng=k, budget=200 if tiny else 100, on_accept=hook)[0])
        check(inst, infer(policy, inst, EpisodeConfig(t_max=1000 if tiny else 120), "stochastic", k,
                          on_accept=hook)[0])
        pairs += 2
    elapsed = time.perf_counter() - t0
    ok = pairs >= 1000 and failures == 0 and elapsed < 300
    assert report(1, ok, f"{pairs} (instance, method) pairs, {checked} solutions checked, "
                         f"{failures} invalid, {elapsed:.0f}s")


def test_c02_oracle_optimality():
    t0 = time.perf_counter()
    hits = dominated = 0
    instances = oracle_scale_instances(100)
    for k, inst in enumerate(instances):
        res = exact_oracle(inst)
        assert res.optimal
        others = [solution_cost(inst, run_method(inst, m, k)[0])
                  for m in ("random_place", "cheapest_place", "fixed_place", "fixed_place_approx", "tetris")]
        best, _ = run_alns(inst, dod=0.3, rng=k, budget=2000)
        alns = solution_cost(inst, best)
        dominated += all(res.cost <= c for c in others + [alns])
        hits += alns == res.cost
    elapsed = time.perf_counter() - t0
    ok = dominated == 100 and hits >= 90 and elapsed < 600
    assert report(2, ok, f"oracle <= every method on {dominated}/100, ALNS optimal on {hits}/100 "
                         f"(DoD 0.3), {elapsed:.0f}s")


def test_c03_feasible_set_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    done = mismatches = 0
    while done < 200:
        n_loc = int(rng.integers(2, 7))
        n_pods = int(rng.integers(1, n_loc + 1))
        inst = build_tiny_instance(n_loc, n_pods, int(rng.integers(4, 21)), int(rng.integers(2**31)))
        if inst.n_decisions == 0:
            continue
        a = random_place(inst, rng).assignments.copy()
        times = [int(t) for t in inst.departure_times]
        pending = {t for t in times if rng.random() < rng.random()} | {times[int(rng.integers(len(times)))]}
        a[list(pending)] = -1
        sol = Solution(a)
        t = sorted(pending)[int(rng.integers(len(pending)))]
        got = sorted(p.location for p in feasible_locations(inst, sol, pending, t)[0])
        fast = sorted(OccupancyIndex(inst, a).feasible(t)[0].tolist())
        mismatches += got != commit_and_validate(inst, a, t) or fast != got
        done += 1
    elapsed = time.perf_counter() - t0
    assert report(3, mismatches == 0 and elapsed < 300, f"{done} partial solutions, {mismatches} mismatches, {elapsed:.0f}s")


def test_c04_formula_suite():
    checks = []
    eq = lambda a, b: checks.append(abs(a - b) <= 1e-12)
    for w, s, lam in [(1.0, 3, 0.8), (0.3, 0, 0.5), (2.5, 1, 0.9)]:
        eq(update_weight(w, s, lam), lam * w + (1 - lam) * s)
    for w, s in [(1.0, 3), (0.1, 0), (0.12, 0), (0.5, 2)]:
        eq(update_weight(w, s, 0.95, 0.1), max(0.1, 0.95 * w + 0.05 * s))
    truth = {(True, True, True, True): 0, (False, False, False, False): 0, (False, True, False, False): 1,
             (False, True, False, True): 2, (False, True, True, True): 3}
    checks += [step_score(*k) == v for k, v in truth.items()]
    checks += [removal_count(d, n) == max(1, math.floor(d * n)) for d, n in [(0.1, 1000), (0.05, 14), (1.0, 7), (0.33, 10)]]
    checks += [encode_action(*decode_action(a)) == a for a in range(24)]
    checks += [tuple(decode_action(23)) == (1, 3, 2), tuple(decode_action(7)) == (0, 2, 1)]
    eq(compute_reward(2, 100, new_best=True, history=[2]).total, 1.02)
    eq(compute_reward(-5, 100, repair_failed=True, rejected=True, history=[-5]).total, -0.35)
    eq(compute_reward(-3, 60, rejected=True, history=[-3]).total, -3 / 60 - 0.1)
    eq(compute_reward(-4, 80, accepted_worse=True, temperature=0.5, history=[-4]).total, -0.05 + 0.05)
    eq(compute_reward(1, 50, history=[3, -2, 1]).total, 1 / 50 - 0.5)
    eq(compute_reward(9, 10, True, [3, -2, 1], True, True, True, destroy_failed=True).total, -1.0)
    ok = all(checks)
    assert report(4, ok, f"{sum(checks)}/{len(checks)} exact formula checks")


def test_c05_sa_statistics():
    rng = np.random.default_rng(5)
    n = 100_000
    r1 = np.mean([sa_accept(1.5, 1.5, 0.0, rng) for _ in range(n)])
    r2 = np.mean([sa_accept(20.0, 1.0, 0.25, rng) for _ in range(n)])
    ok = abs(r1 - math.exp(-1)) <= 0.01 and abs(r2 - 0.25) <= 0.01
    assert report(5, ok, f"rate(delta=T)={r1:.4f} vs {math.exp(-1):.4f}, rate(p=0.25, delta/T=20)={r2:.4f}")


def test_c06_small_family_ordering(small):
    t0 = time.perf_counter()
    methods = ["alns", "tetris", "cheapest_place", "fixed_place"]
    table = compare(small, methods, range(10), params={"alns": TUNED})
    rel = {m: table.relative(m) for m in methods + ["random_place"]}
    middle = min(rel["tetris"], rel["cheapest_place"])
    ok = rel["alns"] < middle < rel["fixed_place"] < rel["random_place"] and rel["alns"] <= 75.0
    elapsed = time.perf_counter() - t0
    detail = ", ".join(f"{m} {v:.2f}%" for m, v in sorted(rel.items(), key=lambda kv: kv[1]))
    assert report(6, ok and elapsed <= 1800, f"{detail}, {elapsed:.0f}s")


def test_c07_medium_analog_ordering(medium, medium_policy):
    t0 = time.perf_counter()
    methods = ["dr_alns", "alns", "tetris", "cheapest_place"]
    params = {"alns": {**TUNED, "budget": 1000, "dod": 0.05}, "dr_alns": {"policy": medium_policy}}
    table = compare(medium, methods, range(5), params=params)
    rel = {m: table.relative(m) for m in methods + ["random_place"]}
    chain = rel["alns"] <= rel["tetris"] < rel["cheapest_place"] < rel["random_place"]
    within = rel["dr_alns"] <= 1.05 * rel["alns"]
    strict = rel["dr_alns"] <= rel["alns"]
    elapsed = time.perf_counter() - t0
    detail = ", ".join(f"{m} {v:.2f}%" for m, v in sorted(rel.items(), key=lambda kv: kv[1]))
    assert report(7, chain and within and elapsed <= 7200,
                  f"{detail}; DR <= 1.05 ALNS: {within}, DR <= ALNS strictly: {strict}, {elapsed:.0f}s")


def test_c08_transfer(medium, small_training):
    t0 = time.perf_counter()
    table = compare(medium, ["dr_alns"], range(5), params={"dr_alns": {"policy": small_training[0].policy}})
    rel = table.relative("dr_alns")
    elapsed = time.perf_counter() - t0
    assert report(8, rel < 85.0 and elapsed <= 3600, f"small-trained policy on medium analog: {rel:.2f}% of random, {elapsed:.0f}s")


def test_c09_learning_signal(small_training):
    res, elapsed = small_training
    eps = res.completed_episodes()
    first = float(np.mean([e.best_cost for e in eps[:5]]))
    last = float(np.mean([e.best_cost for e in eps[-5:]]))
    ok = len(eps) >= 10 and last <= first and elapsed <= 7200
    assert report(9, ok, f"{len(eps)} episodes, mean best cost first 5 {first:.1f}, last 5 {last:.1f}, "
                         f"training {elapsed:.0f}s")


def test_c10_gradient_check():
    errors = [gradient_check(seed, hidden=(64, 64)) for seed in range(10)]
    assert report(10, max(errors) < 1e-4, f"max relative error {max(errors):.2e} over 10 parameter points")


def test_c11_determinism(tmp_path):
    import json

    from prpkit.cli import main

    def snapshot(d):
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"episode": {"t_max": 60}, "ppo": {"n_steps": 64, "batch_size": 32, "n_epochs": 2}}))
    inst = tmp_path / "small.json"
    main(["gen", "small", str(inst)])
    tiny = tmp_path / "tiny.json"
    main(["gen", "tiny", str(tiny), "--locations", "5", "--pods", "4", "--steps", "14"])
    commands = [["gen", "medium-analog", "--steps", "800"], ["tune", str(inst), "--samples", "3", "--budget", "50"],
                ["train", str(inst), "--timesteps", "128", "--config", str(cfg)],
                ["compare", str(inst), "--seeds", "3", "--budget", "100"],
                ["solve", str(tiny), "--method", "exact_oracle"]]
    commands += [["solve", str(inst), "--method", m, "--budget", "100"]
                 for m in ("random_place", "cheapest_place", "fixed_place", "fixed_place_approx", "tetris", "alns")]
    same = 0
    for k, cmd in enumerate(commands):
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / f"{k}{rep}"
            assert main(cmd + ["--seed", "4", "--out", str(d)]) == 0
            outs.append(snapshot(d))
        same += outs[0] == outs[1] and bool(outs[0])
    ckpt = next((tmp_path / "2a").glob("*.policy.json"))
    outs = []
    for rep in ("a", "b"):
        d = tmp_path / f"infer{rep}"
        for mode in ("greedy", "stochastic"):
            assert main(["infer", str(inst), "--checkpoint", str(ckpt), "--mode", mode, "--seed", "4", "--out", str(d)]) == 0
        assert main(["solve", str(inst), "--method", "dr_alns", "--checkpoint", str(ckpt), "--out", str(d)]) == 0
        outs.append(snapshot(d))
    same += outs[0] == outs[1]
    total = len(commands) + 1
    assert report(11, same == total, f"{same}/{total} command groups byte-identical across reruns")
