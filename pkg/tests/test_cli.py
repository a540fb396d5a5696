import json
import os
import subprocess
import sys

import pytest

from ppm_frontier.cli import build_config, read_config_file, run_command

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "schema_v1.json")

SMALL = {
    "frontier-exact": ["--n", "3"],
    "frontier-ppm": ["--n", "3", "--steps", "5"],
    "compare": ["--n", "3", "--steps", "5"],
    "saddle": ["--iters", "200"],
    "sandwich": ["--m", "3", "--n", "20", "--trials", "2", "--alphas", "0.5"],
    "portfolio": ["--n", "4", "--rows", "60", "--steps", "3"],
}


@pytest.fixture(autouse=True)
def _one_thread(monkeypatch):
    monkeypatch.setenv("FRONTIER_PPM_THREADS", "1")


def _run(tmp_path, command, args, name="out.jsonl"):
    out = tmp_path / name
    code = run_command([command, *args, "--out", str(out)])
    return code, out


def _records(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


@pytest.mark.parametrize("command", sorted(SMALL))
def test_schema_matches_golden(tmp_path, command):
    code, out = _run(tmp_path, command, SMALL[command])
    assert code == 0
    with open(GOLDEN) as fh:
        golden = json.load(fh)[command]
    kinds = {}
    for rec in _records(out):
        assert rec["command"] == command
        assert rec["schema_version"] == 1
        assert rec["seed"] == 0
        assert "subproblem" in rec["tolerances"]
        kinds.setdefault(rec["record"], sorted(rec))
    assert kinds == golden


@pytest.mark.parametrize("command", sorted(SMALL))
def test_byte_identical_reruns(tmp_path, command):
    _, a = _run(tmp_path, command, SMALL[command] + ["--seed", "11"], "a.jsonl")
    _, b = _run(tmp_path, command, SMALL[command] + ["--seed", "11"], "b.jsonl")
    assert a.read_bytes() == b.read_bytes()


def test_csv_output(tmp_path):
    code, out = _run(tmp_path, "frontier-exact", ["--n", "3", "--format", "csv"], "f.csv")
    assert code == 0
    lines = out.read_text().splitlines()
    header = lines[0].split(",")
    assert "alpha" in header and "schema_version" in header
    assert len(lines) == 1 + 5 + 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# experiment\nn = 4\nalphas = 0,1\nseed = 3\n")
    out = tmp_path / "o.jsonl"
    assert run_command(["frontier-exact", "--config", str(cfg), "--alphas", "0,0.5,2",
                        "--out", str(out)]) == 0
    recs = _records(out)
    pts = [r for r in recs if r["record"] == "point"]
    assert [p["alpha"] for p in pts] == [0.0, 0.5, 2.0]
    assert len(pts[0]["x"]) == 4 and recs[0]["seed"] == 3


def test_unknown_flag_is_named(tmp_path, capsys):
    code, out = _run(tmp_path, "frontier-ppm", ["--lamda", "2"])
    assert code == 1
    assert "--lamda" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _ = _run(tmp_path, "frontier-exact", ["--config", str(cfg)])
    assert code == 1 and "colour" in capsys.readouterr().err


def test_bad_values_exit_one(tmp_path):
    assert _run(tmp_path, "frontier-exact", ["--n", "three"])[0] == 1
    assert _run(tmp_path, "frontier-exact", ["--alphas", "1,0"])[0] == 1
    assert _run(tmp_path, "frontier-ppm", ["--lambda", "-1"])[0] == 1
    assert _run(tmp_path, "sandwich", ["--m", "100", "--n", "10"])[0] == 1
    assert _run(tmp_path, "frontier-exact", ["--format", "xml"])[0] == 1
    assert run_command(["frontier-exact"]) == 1
    assert run_command(["no-such-command"]) == 1


def test_missing_returns_file(tmp_path):
    code, _ = _run(tmp_path, "portfolio", ["--instance", "returns",
                                           "--returns", str(tmp_path / "none.csv")])
    assert code == 1


def test_solver_failure_exit_two_and_no_partial_file(tmp_path, capsys):
    code, out = _run(tmp_path, "frontier-exact",
                     ["--n", "2", "--domain", "box-simplex", "--lower", "0.6"])
    assert code == 2
    assert "InfeasibleDomain" in capsys.readouterr().err
    assert not out.exists()
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("FRONTIER_PPM_THREADS", "many")
    assert _run(tmp_path, "sandwich", SMALL["sandwich"])[0] == 1


def test_compare_on_equivalence_instance(tmp_path):
    code, out = _run(tmp_path, "compare", ["--n", "5", "--steps", "50", "--seed", "4"])
    assert code == 0
    summary = _records(out)[-1]
    assert summary["record"] == "summary"
    assert summary["max_matching_error"] <= 1e-6


def test_portfolio_from_csv(tmp_path):
    from ppm_frontier.portfolio import synthetic_returns, write_returns_csv

    path = tmp_path / "ret.csv"
    write_returns_csv(path, synthetic_returns(n=4, T=90, seed=1))
    code, out = _run(tmp_path, "portfolio", ["--instance", "returns", "--returns", str(path),
                                             "--steps", "4", "--train-rows", "60"])
    assert code == 0
    pts = [r for r in _records(out) if r["record"] == "point"]
    assert len(pts) == 4 and all("oos_robustness_ppm" in p for p in pts)


def test_read_config_rejects_garbage(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("just words\n")
    with pytest.raises(ValueError):
        read_config_file(cfg)


def test_build_config_defaults():
    cfg = build_config("frontier-ppm", {}, {})
    assert cfg["lambda"] == 1.0 and cfg["format"] == "jsonl" and cfg["tol"] == 1e-10


def test_console_entry_point(tmp_path):
    out = tmp_path / "e.jsonl"
    proc = subprocess.run([sys.executable, "-m", "ppm_frontier.cli", "frontier-exact", "--n", "2",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
