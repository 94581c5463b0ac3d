import json

import pytest

from irsopt import cli


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text("scenario.nt = 3\nscenario.k = 2\nscenario.irs_elements = 2\nalgo.max_outer = 5\n"
                 "experiment.drops = 1\nexperiment.algorithms = penalty-altmin, baseline1-no-irs\n"
                 "experiment.sweep_values = 0, 2, 4, 6\n")
    return p


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_solve_writes_artifacts(small_cfg, tmp_path, capsys):
    out = tmp_path / "solve"
    assert run("solve", "--config", small_cfg, "--out", out) == cli.EXIT_OK
    for name in ("trace.txt", "solution.txt", "estimate.txt", "channels.txt", "manifest.json"):
        assert (out / name).exists()
    man = json.loads((out / "manifest.json").read_text())
    assert len(man["config_digest"]) == 64 and man["seed"] == 0 and man["finished"]
    assert "penalty-altmin" in capsys.readouterr().out


def test_solve_unreachable_target_exits_2(small_cfg, tmp_path):
    small_cfg.write_text(small_cfg.read_text() + "scenario.gamma = 60dB\nscenario.nt = 1\nscenario.k = 3\n")
    assert run("solve", "--config", small_cfg, "--out", tmp_path / "x") == cli.EXIT_INFEASIBLE


def test_usage_and_config_errors_exit_1(small_cfg, tmp_path):
    assert run("solve", "--config", small_cfg, "--algorithm", "magic", "--out", tmp_path) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("scenario.nt = four\n")
    assert run("solve", "--config", bad, "--out", tmp_path) == cli.EXIT_CONFIG
    assert run("frobnicate") == cli.EXIT_CONFIG


def test_sweep_is_byte_identical_and_sized(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("sweep", "--config", small_cfg, "--out", a) == cli.EXIT_OK
    assert run("sweep", "--config", small_cfg, "--out", b) == cli.EXIT_OK
    csv_a = (a / "results.csv").read_bytes()
    assert csv_a == (b / "results.csv").read_bytes()
    assert (a / "results.json").read_bytes() == (b / "results.json").read_bytes()
    assert len(csv_a.decode().splitlines()) == 1 + 8
    assert json.loads((a / "manifest.json").read_text())["outputs"]


def test_sweep_empty_algorithm_list_exits_1(small_cfg, tmp_path):
    small_cfg.write_text(small_cfg.read_text() + "experiment.algorithms =\n")
    assert run("sweep", "--config", small_cfg, "--out", tmp_path) == cli.EXIT_CONFIG


def test_verify_exit_codes(small_cfg, tmp_path, capsys):
    rob, nom = tmp_path / "rob", tmp_path / "nom"
    common = ["--config", small_cfg, "--kappa", "0.1"]
    assert run("solve", *common, "--algorithm", "robust-penalty-altmin", "--out", rob) == 0
    assert run("solve", *common, "--algorithm", "non-robust", "--out", nom) == 0
    capsys.readouterr()
    assert run("verify", "--solution", rob / "solution.txt", "--estimate", rob / "estimate.txt",
               "--samples", 1000) == cli.EXIT_OK
    assert "kappa,samples,min_slack,violations" in capsys.readouterr().out
    assert run("verify", "--solution", nom / "solution.txt", "--estimate", nom / "estimate.txt",
               "--samples", 1000) == cli.EXIT_VIOLATIONS
    assert run("verify", "--solution", rob / "solution.txt", "--estimate", rob / "estimate.txt",
               "--samples", 0) == cli.EXIT_CONFIG


def test_verify_dimension_mismatch_exits_1(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("solve", "--config", small_cfg, "--out", a)
    small_cfg.write_text(small_cfg.read_text() + "scenario.irs_elements = 3\n")
    run("solve", "--config", small_cfg, "--out", b)
    assert run("verify", "--solution", a / "solution.txt", "--estimate", b / "estimate.txt") == cli.EXIT_CONFIG
    assert run("verify", "--solution", tmp_path / "missing.txt", "--estimate", b / "estimate.txt") == cli.EXIT_CONFIG


def test_config_command_prints_digest(small_cfg, capsys):
    assert run("config", "--config", small_cfg, "--seed", 7) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["config"]["scenario"]["seed"] == 7
