from __future__ import annotations

import json
import random

import pytest

from vbqc.graph import Graph
from vbqc.library import (
    BUILTINS,
    brickwork_fragment,
    builtin,
    data_path,
    linear_cluster,
    resolve_pattern,
)
from vbqc.pattern import (
    FlowSpec,
    MeasurementPattern,
    PatternError,
    add_angles,
    correction_exponents,
    dump_pattern,
    load_pattern,
    pattern_from_dict,
    pattern_to_dict,
    validate_pattern,
)


def path_pattern(n: int) -> MeasurementPattern:
    vs = tuple(range(1, n + 1))
    g = Graph(vs, tuple((i, i + 1) for i in vs[:-1]), inputs=(1,), outputs=(n,))
    flow = FlowSpec.from_flow(g, {i: i + 1 for i in vs[:-1]}, vs)
    return MeasurementPattern(g, {v: 0 for v in vs}, flow)


def test_two_vertex_pattern_valid():
    assert validate_pattern(path_pattern(2)) == []


def test_flow_successor_must_be_neighbour():
    g = Graph((1, 2, 3), ((1, 2), (2, 3)), inputs=(1,), outputs=(3,))
    flow = FlowSpec.from_flow(g, {1: 3, 2: 3}, (1, 2, 3))
    problems = validate_pattern(MeasurementPattern(g, {1: 0, 2: 0, 3: 0}, flow))
    assert any("flow successor not neighbour" in s for s in problems)


def test_bad_order_and_angles_reported():
    p = path_pattern(3)
    bad = MeasurementPattern(p.graph, {1: 9, 2: 0}, FlowSpec(order=(3, 2, 1), f=p.flow.f,
                                                              xdeps=p.flow.xdeps, zdeps=p.flow.zdeps))
    problems = validate_pattern(bad)
    assert any("not in 0..7" in s for s in problems)
    assert any("angle missing" in s for s in problems)
    assert any("does not come after" in s for s in problems)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_valid(name):
    assert validate_pattern(builtin(name)) == []


def test_brickwork_fragment_valid():
    p = brickwork_fragment()
    assert validate_pattern(p) == []
    assert len(p.vertices) == 10
    assert p.graph.inputs == (1, 2) and p.graph.outputs == (9, 10)


def test_corrections_first_vertex_empty():
    p = path_pattern(4)
    assert correction_exponents(p.flow, {}, 1) == (0, 0)


def test_corrections_single_x_dependency():
    p = path_pattern(4)
    assert correction_exponents(p.flow, {1: 1}, 2) == (1, 0)


def test_corrections_path4_vertex3():
    p = path_pattern(4)
    assert p.flow.xdeps[3] == {2}
    assert p.flow.zdeps[3] == {1}
    assert correction_exponents(p.flow, {1: 1, 2: 1}, 3) == (1, 1)


def test_corrections_missing_outcome_raises():
    p = path_pattern(4)
    with pytest.raises(PatternError):
        correction_exponents(p.flow, {1: 0}, 3)


def test_corrections_are_xor_linear():
    p = brickwork_fragment()
    rng = random.Random(3)
    for _ in range(200):
        a = {v: rng.randint(0, 1) for v in p.vertices}
        b = {v: rng.randint(0, 1) for v in p.vertices}
        ab = {v: a[v] ^ b[v] for v in p.vertices}
        for v in p.vertices:
            sa, sb, sab = (correction_exponents(p.flow, o, v) for o in (a, b, ab))
            assert sab == (sa[0] ^ sb[0], sa[1] ^ sb[1])


def test_angle_arithmetic_mod8():
    for a in range(8):
        assert add_angles(a, 4, 4) == a
    assert add_angles(7, 3) == 2


def test_json_round_trip(tmp_path):
    for name in BUILTINS:
        p = builtin(name)
        path = tmp_path / f"{name}.json"
        dump_pattern(p, path)
        q = load_pattern(path)
        assert pattern_to_dict(q) == pattern_to_dict(p)


def test_json_rejects_unknown_field():
    data = pattern_to_dict(linear_cluster())
    data["colour"] = 1
    with pytest.raises(PatternError, match="unknown"):
        pattern_from_dict(data)


def test_json_rejects_missing_field_and_schema():
    data = pattern_to_dict(linear_cluster())
    del data["angles"]
    with pytest.raises(PatternError, match="missing"):
        pattern_from_dict(data)
    data = pattern_to_dict(linear_cluster())
    data["schema"] = "other/9"
    with pytest.raises(PatternError, match="schema"):
        pattern_from_dict(data)


def test_shipped_data_files_match_builtins():
    for name in BUILTINS:
        with open(data_path(name)) as fh:
            shipped = json.load(fh)
        assert pattern_from_dict(shipped).flow == builtin(name).flow
        assert resolve_pattern(str(data_path(name))).angles == builtin(name).angles


def test_linear_cluster_needs_odd_length():
    with pytest.raises(ValueError):
        linear_cluster(4)
