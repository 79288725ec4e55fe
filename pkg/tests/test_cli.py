import json

import pytest

from seelab import cli
from seelab.errors import NumericError

HEAT = {"seed": 0, "problem": {"preset": "heat", "N": 4}, "x0": [1.0, 0.5],
        "sim": {"n_steps": 8, "n_paths": 4}}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_simulate_manifest(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["simulate", "--config", _write(tmp_path, HEAT), "--out", str(out)])
    assert code == cli.EXIT_PASS
    man = json.loads((out / "manifest.json").read_text())
    assert man["passed"] and man["checks"]["deterministic_flow"]
    assert man["seed"] == 0
    assert "manifest.json" in man["outputs"] and "paths.csv" in man["outputs"]
    assert set(man) >= {"config_hash", "tool_version", "started", "finished", "inputs"}
    assert json.loads(capsys.readouterr().out)["passed"] is True


def test_hash_ignores_out_and_workers():
    a = dict(HEAT, out="x", workers=3)
    assert cli.canonical_hash(a) == cli.canonical_hash(HEAT)
    assert cli.canonical_hash(dict(HEAT, seed=1)) != cli.canonical_hash(HEAT)


def test_schema_error_reports_path(tmp_path, capsys):
    bad = dict(HEAT, sim={"n_paths": "many"})
    assert cli.main(["simulate", "--config", _write(tmp_path, bad)]) == cli.EXIT_CONFIG
    assert "$.sim.n_paths" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    assert cli.main(["simulate", "--config", _write(tmp_path, dict(HEAT, colour=1))]) == cli.EXIT_CONFIG


def test_seed_flag_must_match(tmp_path, capsys):
    code = cli.main(["simulate", "--config", _write(tmp_path, HEAT), "--seed", "5",
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_CONFIG
    assert "$.seed" in capsys.readouterr().err


def test_command_mismatch(tmp_path):
    cfg = dict(HEAT, command="bsde")
    assert cli.main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("SEELAB_OUT", str(tmp_path / "envout"))
    monkeypatch.setenv("SEELAB_WORKERS", "2")
    assert cli.main(["simulate", "--config", _write(tmp_path, HEAT)]) == 0
    assert (tmp_path / "envout" / "manifest.json").exists()


def test_numeric_error_exit(tmp_path, monkeypatch):
    def boom(*a):
        raise NumericError("non-finite state")
    monkeypatch.setitem(cli.HANDLERS, "simulate", boom)
    assert cli.main(["simulate", "--config", _write(tmp_path, HEAT), "--out", str(tmp_path)]) == cli.EXIT_NUMERIC


def test_failed_check_exit(tmp_path):
    cfg = {"seed": 0, "problem": {"preset": "parabolic", "N": 4},
           "params": {"n_probes": 5, "tail_threshold": 1e-12}}
    code = cli.main(["verify-assumptions", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "a")])
    assert code == cli.EXIT_FAIL
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["checks"]["tail_threshold"] is False


def test_closed_form_required(tmp_path):
    cfg = {"seed": 0, "problem": {"preset": "ou"}}
    assert cli.main(["residual", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_bp_solve_with_csv(tmp_path):
    obj = tmp_path / "f.csv"
    obj.write_text("t_index,x_index,value\n0,0,0\n0,1,0.9\n1,0,1\n1,1,0.2\n")
    cfg = {"seed": 1, "problem": {"preset": "ou"},
           "params": {"objective_csv": str(obj), "times": [0, 0.5], "states": [[0.0], [0.5]],
                      "start": [0, 1], "eps": 0.5}}
    assert cli.main(["bp-solve", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "bp")]) == 0
    res = json.loads((tmp_path / "bp" / "bp_result.json").read_text())
    assert res["verification"]["passed"]


def test_replay_identical_and_refusals(tmp_path, capsys):
    cfg = {"seed": 4, "problem": {"preset": "ou"}, "x0": [0.5], "sim": {"n_steps": 8, "n_paths": 1100}}
    out = tmp_path / "orig"
    assert cli.main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(out), "--workers", "1"]) == 0
    rep = tmp_path / "rep"
    assert cli.main(["replay", str(out / "manifest.json"), "--workers", "4", "--out", str(rep)]) == 0
    man = json.loads((rep / "manifest.json").read_text())
    assert man["drift"] == []
    assert (out / "paths.csv").read_bytes() == (rep / "paths.csv").read_bytes()
    assert cli.main(["replay", str(out / "manifest.json"), "--seed", "5"]) == cli.EXIT_CONFIG
    saved = json.loads((out / "config.json").read_text())
    saved["seed"] = 6
    (out / "config.json").write_text(json.dumps(saved))
    assert cli.main(["replay", str(out / "manifest.json")]) == cli.EXIT_CONFIG
    assert "hash" in capsys.readouterr().err


def test_replay_reports_drift(tmp_path):
    cfg = {"seed": 4, "problem": {"preset": "ou"}, "sim": {"n_steps": 4, "n_paths": 10}}
    out = tmp_path / "orig"
    cli.run("simulate", cfg, out)
    (out / "paths.csv").write_text("tampered\n")
    man, drift = cli.replay(out / "manifest.json", out=tmp_path / "rep")
    assert drift == ["paths.csv"]
    assert man["passed"] is False


@pytest.mark.parametrize("cfg_name", ["lq2_residual.json", "bp_random.json", "heat_simulate.json"])
def test_shipped_configs_run(cfg_name, tmp_path):
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "configs" / cfg_name
    cfg = json.loads(path.read_text())
    assert cli.main([cfg["command"], "--config", str(path), "--out", str(tmp_path)]) == 0
