from __future__ import annotations

import json
import subprocess
import sys

import pytest

from vbqc.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, [json.loads(line) for line in out.out.splitlines()], out.err


def test_validate_builtin_and_file(capsys, tmp_path):
    code, recs, _ = run_cli(capsys, "validate", "brickwork")
    assert code == 0 and recs[0]["valid"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"vertices": [1], "edges": [], "inputs": [], "outputs": [], "angles": {}, "order": [1],
                               "extra": 1}))
    code, _, err = run_cli(capsys, "validate", str(bad))
    assert code == 1 and "unknown" in err


def test_colour_modes(capsys):
    code, recs, _ = run_cli(capsys, "colour", "brickwork", "--mode", "bipartite")
    assert code == 0 and recs[0]["k"] == 2
    code, recs, _ = run_cli(capsys, "colour", "five_vertex", "--mode", "bipartite")
    assert code == 1 and recs[0]["bipartite"] is False


def test_bounds_subcommands(capsys):
    code, recs, _ = run_cli(capsys, "bounds", "eval", "--n", "32", "--d", "16", "--k", "2",
                            "--eps1", "0.1", "--eps2", "0.1", "--phi", "0.1")
    assert code == 0
    assert recs[0]["value"] == pytest.approx(1.5787840621043454)
    code, recs, _ = run_cli(capsys, "bounds", "optimize", "--n", "1024", "--k", "2", "--omega", "0.2")
    assert code == 0 and set(recs[0]["argmin"]) == {"eps1", "eps2", "phi"}
    code, recs, _ = run_cli(capsys, "bounds", "plan", "--target", "1e-6", "--k", "2", "--omega", "0.2")
    assert recs[0]["n"] == 15269


def test_infeasible_exit_code(capsys):
    code, recs, err = run_cli(capsys, "bounds", "optimize", "--k", "2", "--omega", "0.25")
    assert code == 1 and recs == []
    assert "infeasible" in err


def test_run_is_byte_reproducible(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.jsonl"
        code = main(["run", "--pattern", "five_vertex", "--n", "6", "--d", "3", "--w", "1", "--trials", "8",
                     "--seed", "4", "--behaviour", '{"kind": "depolarizing", "p": 0.05}', "--out", str(path)])
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert len(outs[0].splitlines()) == 9


def test_attack_reports_bound(capsys):
    code, recs, _ = run_cli(capsys, "attack", "--pattern", "identity", "--n", "8", "--d", "4", "--omega", "0.2",
                            "--trials", "500", "--m", "4", "--target", "1")
    assert code == 0
    assert recs[0]["bound"] == pytest.approx(1.923, abs=1e-3)
    assert recs[0]["params"]["w"] == 1


def test_config_file_with_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pattern": "not", "params": {"n": 5, "d": 3, "t": 2, "w": 1}, "trials": 3}))
    code, recs, _ = run_cli(capsys, "run", "--config", str(cfg), "--trials", "4")
    assert code == 0 and recs[0]["trials"] == 4 and recs[0]["correct_accept"] == 4


def test_usage_errors_exit_2():
    proc = subprocess.run([sys.executable, "-m", "vbqc", "teleport"], capture_output=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "vbqc", "bounds", "eval", "--n", "3"], capture_output=True)
    assert proc.returncode == 2
