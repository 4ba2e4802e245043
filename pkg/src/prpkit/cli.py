"""Command-line interface: ``prpkit {gen,solve,tune,train,infer,compare}``.

Output files go to ``--out`` (default: ``$PRPKIT_OUT`` or the working
directory). Files never contain timings, so a fixed seed gives identical bytes.

Exit codes: 0 success, 2 usage, 3 input/output, 4 infeasible instance,
5 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .exceptions import CheckpointError, InfeasibleInstanceError, InstanceFormatError, PRPError
from .io import load_instance, save_instance, save_solution

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4, 5
OUT_ENV = "PRPKIT_OUT"
FAMILIES = ("small", "medium", "medium-analog", "tiny")


class UsageError(Exception):
    pass


def _dump_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        doc = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"config {args.config} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InstanceFormatError("config must be a JSON object keyed by method or section")
    return doc


def _method_params(args, config: dict, method: str) -> dict:
    params = dict(config.get(method, {}))
    if method == "alns":
        for key in ("budget", "dod"):
            if getattr(args, key, None) is not None:
                params[key] = getattr(args, key)
    if method == "dr_alns":
        if getattr(args, "checkpoint", None):
            params["checkpoint"] = args.checkpoint
        if getattr(args, "mode", None):
            params["mode"] = args.mode
        params.setdefault("episode", config.get("episode", {}))
    if method == "exact_oracle" and getattr(args, "node_budget", None) is not None:
        params["node_budget"] = args.node_budget
    return params


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------
def cmd_gen(args) -> int:
    from . import generators

    seed = args.seed
    if args.family == "small":
        inst = generators.build_small_instance(seed, steps=args.steps or 1000)
    elif args.family == "medium":
        inst = generators.build_medium_instance(seed, steps=args.steps or 20000)
    elif args.family == "medium-analog":
        inst = generators.build_medium_analog(seed, steps=args.steps or 5000)
    else:
        inst = generators.build_tiny_instance(args.locations, args.pods, args.steps or 12, seed)
    path = Path(args.path) if args.path else _out_dir(args) / f"{inst.name}.json"
    save_instance(inst, path)
    print(f"wrote {path} ({inst.n_locations} locations, {inst.n_pods} pods, {inst.horizon} steps)")
    return EXIT_OK


def _write_solution(args, inst, method, sol, stats, seed):
    from .model import solution_cost

    out = _out_dir(args)
    stem = f"{inst.name}.{method}.seed{seed}"
    cost = solution_cost(inst, sol)
    sol_path = save_solution(inst, sol, out / f"{stem}.solution.json", cost)
    if stats is not None:
        stats.to_csv(out / f"{stem}.stats.csv")
    return cost, sol_path


def cmd_solve(args) -> int:
    from .experiments import METHODS, run_method

    if args.method not in METHODS:
        raise UsageError(f"unknown method {args.method!r}; choose from {', '.join(METHODS)}")
    inst = load_instance(args.instance)
    params = _method_params(args, _load_config(args), args.method)
    t0 = time.perf_counter()
    sol, stats = run_method(inst, args.method, args.seed, params)
    runtime = time.perf_counter() - t0
    cost, path = _write_solution(args, inst, args.method, sol, stats, args.seed)
    print(f"method={args.method} total_cost={cost} runtime={runtime:.3f}s solution={path}")
    return EXIT_OK


def cmd_tune(args) -> int:
    from .experiments import tune

    inst = load_instance(args.instance)
    config = _load_config(args)
    params = _method_params(args, config, "alns")
    try:
        res = tune(inst, args.samples, args.seed, params, args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    res.to_csv(out / f"{inst.name}.tune.csv")
    _dump_json(out / f"{inst.name}.tune-best.json", {"alns": {**params, **res.best}, "cost": res.best_cost})
    print(f"best cost {res.best_cost} with " + " ".join(f"{k}={v}" for k, v in res.best.items()))
    return EXIT_OK


def _episode_and_ppo(config: dict, args):
    from .drl import EpisodeConfig, PPOConfig

    return EpisodeConfig.from_dict(config.get("episode", {})), PPOConfig.from_dict(config.get("ppo", {}))


def cmd_train(args) -> int:
    import csv

    from .drl import save_policy, train

    inst = load_instance(args.instance)
    config = _load_config(args)
    episode, ppo = _episode_and_ppo(config, args)
    res = train(inst, episode, ppo, args.timesteps, args.seed)
    out = _out_dir(args)
    path = Path(args.checkpoint) if args.checkpoint else out / f"{inst.name}.policy.json"
    meta = {
        "seed": args.seed,
        "timesteps": args.timesteps,
        "instance": inst.name,
        "episode": episode.to_dict(),
        "ppo": ppo.to_dict(),
    }
    save_policy(res.policy, path, meta)
    res.log_csv(out / f"{inst.name}.train-log.csv")
    with open(out / f"{inst.name}.episodes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "steps", "total_reward", "initial_cost", "best_cost", "complete"])
        for e in res.episodes:
            w.writerow([e.episode, e.steps, repr(float(e.total_reward)), e.initial_cost, e.best_cost, int(e.complete)])
    last = res.log[-1][0] if res.log else 0
    print(f"trained {last} timesteps, {len(res.completed_episodes())} full episodes; checkpoint {path}")
    return EXIT_OK


def cmd_infer(args) -> int:
    from .drl import EpisodeConfig, infer, load_policy

    policy, meta = load_policy(args.checkpoint)
    inst = load_instance(args.instance)
    config = _load_config(args)
    episode = EpisodeConfig.from_dict(config.get("episode", meta.get("episode", {})))
    t0 = time.perf_counter()
    sol, stats = infer(policy, inst, episode, args.mode, args.seed)
    runtime = time.perf_counter() - t0
    cost, path = _write_solution(args, inst, f"dr_alns-{args.mode}", sol, stats, args.seed)
    print(f"method=dr_alns mode={args.mode} total_cost={cost} runtime={runtime:.3f}s solution={path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .experiments import METHODS, compare

    inst = load_instance(args.instance)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHODS)}")
    seeds = _parse_seeds(args.seeds)
    config = _load_config(args)
    params = {m: _method_params(args, config, m) for m in set(methods) | {"random_place"}}
    table = compare(inst, methods, seeds, params, args.threads)
    out = _out_dir(args)
    table.to_csv(out / f"{inst.name}.compare.csv", include_runtime=args.with_runtime)
    table.runs_csv(out / f"{inst.name}.runs.csv", include_runtime=args.with_runtime)
    table.plot_csv(out / f"{inst.name}.plot.csv")
    width = max(len(m) for m, *_ in table.table)
    for m, mean, rel, rt, n_ok, n_bad in table.table:
        note = f"  ({n_bad} failed)" if n_bad else ""
        print(f"{m:<{width}}  {rel:8.2f}%  mean cost {mean:.1f}  {rt:.2f}s{note}")
    return EXIT_OK


def _parse_seeds(text: str) -> list:
    """``"10"`` means seeds 0..9; ``"1,5,7"`` is an explicit list."""
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        n = int(text)
    except ValueError as exc:
        raise UsageError(f"bad seed list {text!r}") from exc
    if n < 1:
        raise UsageError("need at least one seed")
    return list(range(n))


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for tune/compare")
    common.add_argument("--config", help="JSON file with per-method parameters")

    p = argparse.ArgumentParser(prog="prpkit", description="Pod repositioning solvers and experiments.",
                                parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate an instance file")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("path", nargs="?", help="output file (default: <out>/<name>.json)")
    g.add_argument("--steps", type=int)
    g.add_argument("--locations", type=int, default=4, help="tiny family only")
    g.add_argument("--pods", type=int, default=3, help="tiny family only")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", parents=[common], help="solve an instance with one method")
    s.add_argument("instance")
    s.add_argument("--method", default="alns")
    s.add_argument("--budget", type=int, help="ALNS iterations")
    s.add_argument("--dod", type=float, help="ALNS degree of destruction")
    s.add_argument("--checkpoint", help="policy file for dr_alns")
    s.add_argument("--mode", choices=("greedy", "stochastic"), help="dr_alns action selection")
    s.add_argument("--node-budget", type=int, dest="node_budget", help="exact_oracle node limit")
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("tune", parents=[common], help="random search over annealing parameters")
    t.add_argument("instance")
    t.add_argument("--samples", type=int, default=50)
    t.add_argument("--budget", type=int)
    t.add_argument("--dod", type=float)
    t.set_defaults(func=cmd_tune)

    tr = sub.add_parser("train", parents=[common], help="train an operator-selection policy")
    tr.add_argument("instance")
    tr.add_argument("--timesteps", type=int, default=20000)
    tr.add_argument("--checkpoint", help="output policy file (default: <out>/<name>.policy.json)")
    tr.set_defaults(func=cmd_train)

    inf = sub.add_parser("infer", parents=[common], help="run a trained policy on an instance")
    inf.add_argument("instance")
    inf.add_argument("--checkpoint", required=True)
    inf.add_argument("--mode", choices=("greedy", "stochastic"), default="greedy")
    inf.set_defaults(func=cmd_infer)

    c = sub.add_parser("compare", parents=[common], help="compare methods over several seeds")
    c.add_argument("instance")
    c.add_argument("--methods", default="random_place,cheapest_place,fixed_place,fixed_place_approx,tetris,alns")
    c.add_argument("--seeds", default="10", help="count (0..n-1) or comma-separated list")
    c.add_argument("--budget", type=int)
    c.add_argument("--dod", type=float)
    c.add_argument("--checkpoint")
    c.add_argument("--mode", choices=("greedy", "stochastic"))
    c.add_argument("--node-budget", type=int, dest="node_budget")
    c.add_argument("--with-runtime", action="store_true", help="add runtime columns (breaks byte-identical output)")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"prpkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleInstanceError as exc:
        print(f"prpkit: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, InstanceFormatError, CheckpointError) as exc:
        print(f"prpkit: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PRPError as exc:
        # generator preconditions such as more pods than locations
        print(f"prpkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - last resort
        print(f"prpkit: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
