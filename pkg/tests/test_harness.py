from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from vbqc.adversary import Honest, Malicious, Noisy
from vbqc.graph import greedy_colouring
from vbqc.harness import (
    ExperimentConfig,
    Summary,
    blindness_test,
    delta_uniformity,
    distinguishing_auc,
    make_behaviour,
    monte_carlo,
    robustness_sweep,
    sample_transcripts,
    sigma_m_sweep,
)
from vbqc.library import builtin
from vbqc.protocol import ProtocolParams


def test_behaviour_presets():
    assert isinstance(make_behaviour(None), Honest)
    assert isinstance(make_behaviour({"kind": "depolarizing", "p": 0.1}), Noisy)
    assert make_behaviour({"kind": "dephasing", "q": 0.1, "schedule": "before_entangle"}).noise.schedule == (
        "before_entangle"
    )
    assert isinstance(make_behaviour({"kind": "pauli", "px": 0.1}), Noisy)
    sm = make_behaviour({"kind": "sigma_m", "m": 3, "target": 2})
    assert isinstance(sm, Malicious) and sm.attack.attacked_runs == [0, 1, 2]
    at = make_behaviour({"kind": "attack", "runs": {"1": [[2, "Y"]]}})
    assert at.attack.for_run(1) == ((2, "Y"),)
    with pytest.raises(ValueError):
        make_behaviour({"kind": "cosmic"})


def test_config_round_trip_and_validation(tmp_path):
    cfg = ExperimentConfig(pattern="five_vertex", params={"n": 8, "omega": 0.2}, trials=5, input=(1, 0))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(str(path)) == cfg
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"pattern": "identity", "colour": "red"})
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(colouring="explicit")
    with pytest.raises(ValueError):
        ExperimentConfig(engine="analog")


def test_config_resolution():
    cfg = ExperimentConfig(pattern="brickwork", colouring="bipartite", params={"n": 10, "omega": 0.2})
    p = cfg.resolve_pattern()
    c = cfg.resolve_colouring(p)
    assert c.k == 2
    params = cfg.resolve_params(c.k)
    assert (params.d, params.t, params.w) == (5, 5, 1)
    assert cfg.nominal_omega(params) == 0.2
    explicit = ExperimentConfig(colouring="explicit", classes=((1, 3), (2,)))
    assert explicit.resolve_colouring(builtin("identity")).k == 2
    with pytest.raises(ValueError):
        ExperimentConfig(pattern="five_vertex", colouring="bipartite").resolve_colouring(builtin("five_vertex"))


def test_monte_carlo_honest_summary():
    cfg = ExperimentConfig(pattern="not", trials=40, seed=3, input=(1,))
    s = monte_carlo(cfg)
    assert s.accept == s.correct_accept == 40
    assert s.mean_c_fail == 0.0
    assert set(s.colour_trap_failure.values()) == {0.0}
    assert s.bounds["secure_regime"] is False


def test_monte_carlo_deterministic_across_jobs(tmp_path):
    cfg = ExperimentConfig(
        pattern="five_vertex",
        params={"n": 6, "d": 3, "t": 3, "w": 2},
        behaviour={"kind": "depolarizing", "p": 0.1},
        trials=30,
        seed=11,
    )
    a, rec_a = monte_carlo(cfg, keep_records=True, chunk=7)
    b, rec_b = monte_carlo(replace(cfg, jobs=2), keep_records=True, chunk=7)
    assert a == b
    assert rec_a == rec_b
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)


def test_monte_carlo_writes_records(tmp_path):
    out = tmp_path / "trials.jsonl"
    cfg = ExperimentConfig(pattern="identity", trials=6, seed=1, out=str(out))
    s = monte_carlo(cfg)
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(lines) == 7
    assert lines[-1]["schema"] == "vbqc.summary/1"
    assert {"partition", "colours", "c_fail", "verdict", "outputs", "redo_counts"} <= set(lines[0])
    assert lines[-1]["accept"] == s.accept


def test_summary_wall_time_ignored():
    a = Summary(trials=1, accept=1, correct_accept=1, wall_time=1.0)
    b = Summary(trials=1, accept=1, correct_accept=1, wall_time=2.0)
    assert a == b
    assert "wall_time" not in a.to_dict()


def test_classical_engine_matches_quantum_under_attack():
    base = ExperimentConfig(
        pattern="five_vertex",
        params={"n": 6, "d": 3, "t": 3, "w": 1},
        behaviour={"kind": "sigma_m", "m": 3, "target": 3},
        trials=40,
        seed=2,
    )
    q = monte_carlo(base)
    c = monte_carlo(replace(base, engine="classical"))
    assert (q.accept, q.correct_accept, q.mean_c_fail) == (c.accept, c.correct_accept, c.mean_c_fail)


def test_transcript_sampler_and_uniformity():
    p = builtin("five_vertex")
    c = greedy_colouring(p.graph, p.order)
    rows, redone = sample_transcripts(p, c, 400, 0, "mix")
    assert rows.shape == (400, 10)
    assert not redone.any()
    assert delta_uniformity(p, rows)["min_adjusted"] > 0.01
    broken, _ = sample_transcripts(p, c, 400, 0, "computation", broken=True)
    assert delta_uniformity(p, broken)["min_adjusted"] < 1e-6
    _, redone = sample_transcripts(p, c, 200, 1, "computation", redo_rate=0.5)
    assert 0 < redone.mean() < 1


def test_distinguisher_detects_difference():
    p = builtin("identity")
    rng = np.random.default_rng(0)
    a = np.column_stack([rng.integers(0, 8, (600, 3)), rng.integers(0, 2, (600, 3))])
    b = a.copy()
    b[:, 0] = 0
    assert distinguishing_auc(p, a, b) > 0.8
    same = np.column_stack([rng.integers(0, 8, (600, 3)), rng.integers(0, 2, (600, 3))])
    assert 0.4 < distinguishing_auc(p, a, same) < 0.6


def test_blindness_report_small():
    report = blindness_test(ExperimentConfig(pattern="identity", seed=1), samples=800)
    assert report.control_min_p < 1e-6
    assert set(report.auc) == {"run_type", "input", "redo"}
    assert all(0.4 < v < 0.6 for v in report.auc.values())


def test_sigma_m_sweep_cells():
    p = builtin("identity")
    c = greedy_colouring(p.graph, p.order)
    params = ProtocolParams(8, 4, 4, 1, c.k)
    cells = sigma_m_sweep(p, c, params, 20_000, seed=0, ms=[0, 4], targets=[1, 2])
    assert [(cell.m, cell.target) for cell in cells] == [(0, 1), (0, 2), (4, 1), (4, 2)]
    assert cells[0].incorrect_accept == 0
    assert abs(cells[2].frequency - 9 / 35) < 4 * np.sqrt(9 / 35 * 26 / 35 / 20_000)
    # vertex 2 feeds no output bit, so nothing goes wrong there
    assert cells[3].wrong_output == 0


def test_robustness_sweep_rows():
    cfg = ExperimentConfig(pattern="identity", params={"n": 10}, trials=20, engine="classical")
    rows = robustness_sweep([0.0, 0.2], [0.05, 0.3], cfg, estimate_trials=100)
    assert len(rows) == 4
    zero = [r for r in rows if r["noise"] == 0.0]
    assert all(r["p_max"] == 0.0 and r["regime"] == "accept" for r in zero)
    assert all(r["accept_rate"] == 1.0 for r in zero)
