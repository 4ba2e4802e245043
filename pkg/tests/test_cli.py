import json
from pathlib import Path

import pytest

from prpkit.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main
from prpkit.io import load_instance, load_solution
from prpkit.model import solution_cost


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "inst.json"
    assert run("gen", "small", path, "--steps", 150, "--seed", 2) == EXIT_OK
    return path


def snapshot(directory: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_gen_families(tmp_path):
    assert run("gen", "tiny", "--locations", 4, "--pods", 3, "--steps", 10, "--out", tmp_path) == EXIT_OK
    inst = load_instance(tmp_path / "tiny-4-3-10-0.json")
    assert (inst.n_locations, inst.n_pods, inst.horizon) == (4, 3, 10)


def test_gen_bad_sizes(tmp_path):
    assert run("gen", "tiny", "--locations", 2, "--pods", 3, "--out", tmp_path) == EXIT_USAGE


def test_usage_errors(tmp_path, small_file):
    assert run("nonsense") == EXIT_USAGE
    assert run("solve", small_file, "--method", "magic", "--out", tmp_path) == EXIT_USAGE
    assert run("compare", small_file, "--methods", "magic", "--out", tmp_path) == EXIT_USAGE
    assert run("compare", small_file, "--seeds", "x", "--out", tmp_path) == EXIT_USAGE


def test_io_errors(tmp_path, small_file):
    assert run("solve", tmp_path / "missing.json", "--out", tmp_path) == EXIT_IO
    assert run("infer", small_file, "--checkpoint", tmp_path / "none.json", "--out", tmp_path) == EXIT_IO
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run("solve", bad, "--out", tmp_path) == EXIT_IO


def test_solve_writes_matching_cost(tmp_path, small_file, capsys):
    assert run("solve", small_file, "--method", "alns", "--budget", 40, "--out", tmp_path, "--seed", 1) == EXIT_OK
    inst = load_instance(small_file)
    sol, doc = load_solution(tmp_path / f"{inst.name}.alns.seed1.solution.json")
    assert doc["total_cost"] == solution_cost(inst, sol)
    assert f"total_cost={doc['total_cost']}" in capsys.readouterr().out
    assert (tmp_path / f"{inst.name}.alns.seed1.stats.csv").exists()


def test_out_from_environment(tmp_path, small_file, monkeypatch):
    monkeypatch.setenv("PRPKIT_OUT", str(tmp_path / "envout"))
    assert run("solve", small_file, "--method", "cheapest_place") == EXIT_OK
    assert any((tmp_path / "envout").iterdir())


def test_config_file(tmp_path, small_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alns": {"budget": 5, "dod": 0.5}}))
    assert run("solve", small_file, "--config", cfg, "--out", tmp_path / "o") == EXIT_OK
    stats = next((tmp_path / "o").glob("*.stats.csv")).read_text().splitlines()
    assert len(stats) == 1 + 5 and ",0.5," in stats[1]


def test_train_then_infer(tmp_path, small_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"episode": {"t_max": 20}, "ppo": {"n_steps": 20, "batch_size": 10, "n_epochs": 1}}))
    out = tmp_path / "o"
    assert run("train", small_file, "--timesteps", 40, "--config", cfg, "--out", out) == EXIT_OK
    inst = load_instance(small_file)
    ckpt = out / f"{inst.name}.policy.json"
    log = (out / f"{inst.name}.train-log.csv").read_text().splitlines()
    assert len(log) == 41
    assert run("infer", small_file, "--checkpoint", ckpt, "--out", out) == EXIT_OK
    assert run("solve", small_file, "--method", "dr_alns", "--checkpoint", ckpt, "--out", out) == EXIT_OK
    stats = (out / f"{inst.name}.dr_alns-greedy.seed0.stats.csv").read_text().splitlines()
    assert len(stats) == 21  # the episode schedule travels with the checkpoint


COMMANDS = {
    "gen": lambda f, cfg: ["gen", "small", "--steps", 120],
    "solve": lambda f, cfg: ["solve", f, "--method", "alns", "--budget", 30],
    "tune": lambda f, cfg: ["tune", f, "--samples", 2, "--budget", 15],
    "train": lambda f, cfg: ["train", f, "--timesteps", 30, "--config", cfg],
    "compare": lambda f, cfg: ["compare", f, "--methods", "cheapest_place,tetris,alns", "--seeds", 2, "--budget", 20],
}


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_byte_identical_reruns(tmp_path, small_file, command):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"episode": {"t_max": 15}, "ppo": {"n_steps": 15, "batch_size": 5, "n_epochs": 1}}))
    argv = COMMANDS[command](small_file, cfg)
    for run_dir in ("a", "b"):
        assert run(*argv, "--seed", 7, "--out", tmp_path / run_dir) == EXIT_OK
    first, second = snapshot(tmp_path / "a"), snapshot(tmp_path / "b")
    assert first and first == second


def test_infer_byte_identical(tmp_path, small_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"episode": {"t_max": 15}, "ppo": {"n_steps": 15, "batch_size": 5, "n_epochs": 1}}))
    assert run("train", small_file, "--timesteps", 15, "--config", cfg, "--out", tmp_path / "t") == EXIT_OK
    ckpt = next((tmp_path / "t").glob("*.policy.json"))
    for d in ("a", "b"):
        assert run("infer", small_file, "--checkpoint", ckpt, "--mode", "stochastic", "--seed", 3,
                   "--out", tmp_path / d) == EXIT_OK
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")


def test_version(capsys):
    assert run("--version") == EXIT_OK
    assert "prpkit" in capsys.readouterr().out
