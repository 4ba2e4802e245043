"""Parameter tuning and multi-seed method comparison.

Both run independent cells (one search per configuration or per method and
seed), optionally in worker processes, and always report rows in a fixed
order so the written files do not depend on scheduling.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .alns import OperatorWeights, SAParams, run_alns
from .exceptions import PRPError
from .model import Instance, Solution, solution_cost
from .validation import check_rng

METHODS = (
    "random_place",
    "cheapest_place",
    "fixed_place",
    "fixed_place_approx",
    "tetris",
    "alns",
    "dr_alns",
    "exact_oracle",
)

TUNING_GRID = {
    "t_start": (5.0, 7.5, 10.0, 12.5, 15.0),
    "t_stop": (0.1, 0.3, 0.5, 0.7, 0.9),
    "chain_length": (30, 40, 50),
    "alpha": (0.76, 0.80, 0.84, 0.88, 0.92, 0.95),
}

ALNS_DEFAULTS = {
    "budget": 1000,
    "dod": 0.05,
    "t_start": 12.5,
    "t_stop": 0.1,
    "alpha": 0.95,
    "chain_length": 30,
    "p_accept": 0.25,
    "stagnation_limit": 200,
    "cooling": "chain",
    "reaction": 0.8,
    "tetris_phase1": "highest",
    "repair_order": "dwell",
}


def _alns(instance, seed, params):
    p = {**ALNS_DEFAULTS, **(params or {})}
    sa = SAParams(p["t_start"], p["t_stop"], p["alpha"], p["chain_length"], p["p_accept"],
                  p["stagnation_limit"], p["cooling"])
    return run_alns(instance, sa=sa, weights=OperatorWeights.uniform(reaction=p["reaction"]), dod=p["dod"],
                    rng=seed, budget=p["budget"], tetris_phase1=p["tetris_phase1"],
                    repair_order=p["repair_order"])


def _dr_policy(instance, seed, params):
    from .drl import EpisodeConfig, PPOConfig, load_policy, train

    params = params or {}
    if params.get("policy") is not None:
        return params["policy"]
    if params.get("checkpoint"):
        return load_policy(params["checkpoint"])[0]
    episode = EpisodeConfig.from_dict(params.get("episode", {}))
    ppo = PPOConfig.from_dict(params.get("ppo", {}))
    return train(instance, episode, ppo, params.get("timesteps", 20000), seed).policy


def run_method(instance: Instance, method: str, seed: int = 0, params: dict = None):
    """Run one method. Returns ``(solution, stats_or_None)``."""
    params = params or {}
    if method == "random_place":
        return baselines.random_place(instance, seed), None
    if method == "cheapest_place":
        return baselines.cheapest_place(instance, params.get("mode", "store")), None
    if method == "fixed_place":
        return baselines.fixed_place(instance), None
    if method == "fixed_place_approx":
        return baselines.fixed_place_approx(instance), None
    if method == "tetris":
        return baselines.tetris_baseline(instance), None
    if method == "alns":
        return _alns(instance, seed, params)
    if method == "dr_alns":
        from .drl import EpisodeConfig, infer

        policy = _dr_policy(instance, seed, params)
        episode = EpisodeConfig.from_dict(params.get("episode", {}))
        return infer(policy, instance, episode, params.get("mode", "greedy"), seed)
    if method == "exact_oracle":
        res = baselines.exact_oracle(instance, params.get("node_budget", 2_000_000))
        res.solution.meta.update(optimal=res.optimal, nodes=res.nodes)
        return res.solution, None
    raise PRPError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def _map(fn, jobs, threads):
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _write(path, text):
    if path is not None:
        Path(path).write_text(text)
    return text


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


# --------------------------------------------------------------------------
# tuning
# --------------------------------------------------------------------------
def tuning_grid() -> list:
    keys = list(TUNING_GRID)
    return [dict(zip(keys, vals)) for vals in itertools.product(*TUNING_GRID.values())]


@dataclass
class TuneResult:
    rows: list  # (grid_index, config, cost, runtime), sorted by grid_index
    best: dict
    best_cost: int

    def to_csv(self, path=None, include_runtime: bool = False) -> str:
        header = ["grid_index", *TUNING_GRID, "cost"] + (["runtime_s"] if include_runtime else [])
        rows = []
        for idx, cfg, cost, rt in self.rows:
            row = [idx, *(cfg[k] for k in TUNING_GRID), cost]
            rows.append(row + ([_fmt(rt)] if include_runtime else []))
        return _write(path, _csv(header, rows))


def _tune_cell(job):
    instance, idx, cfg, seed, base = job
    t0 = time.perf_counter()
    sol, _ = _alns(instance, seed, {**base, **cfg})
    return idx, cfg, solution_cost(instance, sol), time.perf_counter() - t0


def tune(instance: Instance, samples: int = 50, seed: int = 0, params: dict = None, threads: int = 1) -> TuneResult:
    """Random search over the annealing grid, sampled without replacement.

    Every sampled configuration runs the search with the same seed, so the
    comparison between configurations uses common random numbers.
    """
    grid = tuning_grid()
    if not 1 <= samples <= len(grid):
        raise ValueError(f"samples must lie in [1, {len(grid)}]")
    picks = sorted(int(i) for i in check_rng(seed).choice(len(grid), size=samples, replace=False))
    jobs = [(instance, i, grid[i], seed, params or {}) for i in picks]
    rows = sorted(_map(_tune_cell, jobs, threads), key=lambda r: r[0])
    best = min(rows, key=lambda r: (r[2], r[0]))
    return TuneResult(rows, best[1], best[2])


# --------------------------------------------------------------------------
# comparison
# --------------------------------------------------------------------------
@dataclass
class RunRecord:
    method: str
    seed: int
    cost: float
    runtime: float
    error: str = ""
    solution: Solution = field(default=None, repr=False)


@dataclass
class ComparisonTable:
    runs: list
    table: list  # (method, mean_cost, relative_pct, mean_runtime, n_ok, n_failed)
    baseline_cost: float

    def row(self, method):
        for r in self.table:
            if r[0] == method:
                return r
        raise KeyError(method)

    def relative(self, method) -> float:
        return self.row(method)[2]

    def to_csv(self, path=None, include_runtime: bool = False) -> str:
        header = ["method", "mean_cost", "relative_pct", "seeds", "failed"]
        if include_runtime:
            header.append("mean_runtime_s")
        rows = []
        for m, mean, rel, rt, n_ok, n_bad in self.table:
            row = [m, _fmt(mean), _fmt(rel), n_ok, n_bad]
            rows.append(row + ([_fmt(rt)] if include_runtime else []))
        return _write(path, _csv(header, rows))

    def runs_csv(self, path=None, include_runtime: bool = False) -> str:
        header = ["method", "seed", "cost", "error"] + (["runtime_s"] if include_runtime else [])
        rows = []
        for r in self.runs:
            cost = "" if r.error else int(r.cost)
            rows.append([r.method, r.seed, cost, r.error] + ([_fmt(r.runtime)] if include_runtime else []))
        return _write(path, _csv(header, rows))

    def plot_csv(self, path=None) -> str:
        return _write(path, _csv(["method", "relative_pct"], [[m, _fmt(rel)] for m, _, rel, *_ in self.table]))


def _compare_cell(job):
    instance, method, seed, params = job
    t0 = time.perf_counter()
    try:
        sol, _ = run_method(instance, method, seed, params)
        cost = solution_cost(instance, sol)
        return RunRecord(method, seed, cost, time.perf_counter() - t0, "", sol)
    except PRPError as exc:
        return RunRecord(method, seed, math.nan, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")


def compare(instance: Instance, methods, seeds, params: dict = None, threads: int = 1) -> ComparisonTable:
    """Run every (method, seed) pair and normalise by the mean random-placement cost.

    ``random_place`` is added when missing. A failing cell becomes a row with
    an error message; the table is produced regardless.
    """
    methods = list(dict.fromkeys(methods))
    for m in methods:
        if m not in METHODS:
            raise PRPError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if "random_place" not in methods:
        methods.insert(0, "random_place")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    params = params or {}
    jobs = [(instance, m, s, params.get(m, {})) for m in sorted(methods) for s in sorted(seeds)]
    runs = _map(_compare_cell, jobs, threads)
    runs.sort(key=lambda r: (r.method, r.seed))

    by_method = {m: [r for r in runs if r.method == m] for m in sorted(methods)}
    ok_random = [r.cost for r in by_method["random_place"] if not r.error]
    denom = float(np.mean(ok_random)) if ok_random else math.nan
    table = []
    for m, rs in by_method.items():
        ok = [r for r in rs if not r.error]
        mean = float(np.mean([r.cost for r in ok])) if ok else math.nan
        rt = float(np.mean([r.runtime for r in ok])) if ok else math.nan
        rel = 100.0 * mean / denom if ok and denom > 0 else math.nan
        table.append((m, mean, rel, rt, len(ok), len(rs) - len(ok)))
    return ComparisonTable(runs, table, denom)
