"""Measurement patterns: graph, angles in units of pi/4, and flow.

Angles are plain integers mod 8 (``a`` means ``a * pi / 4``); all of the
blinding algebra stays inside this set so no floating point is involved.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .graph import Graph

N_ANGLES = 8
PI = 4  # pi in units of pi/4


class PatternError(ValueError):
    pass


def angle(a: int) -> int:
    return a % N_ANGLES


def add_angles(*angles: int) -> int:
    return sum(angles) % N_ANGLES


def negate_angle(a: int) -> int:
    return (N_ANGLES - a) % N_ANGLES


def to_radians(a: int) -> float:
    return (a % N_ANGLES) * math.pi / 4


@dataclass(frozen=True)
class FlowSpec:
    """Measurement order plus the X/Z dependency sets of every vertex.

    ``f`` is kept for validation; corrections only ever read ``xdeps`` and
    ``zdeps``, so patterns without a causal flow can still supply them.
    """

    order: tuple[int, ...]
    f: Mapping[int, int] = field(default_factory=dict)
    xdeps: Mapping[int, frozenset[int]] = field(default_factory=dict)
    zdeps: Mapping[int, frozenset[int]] = field(default_factory=dict)

    @classmethod
    def from_flow(cls, graph: Graph, f: Mapping[int, int], order: Sequence[int]) -> FlowSpec:
        """Derive dependency sets from a causal flow.

        Measuring ``u`` with outcome 1 leaves ``X`` on ``f(u)`` and ``Z`` on
        every other neighbour of ``f(u)``, hence
        ``xdeps(v) = {u : f(u) = v}`` and ``zdeps(v) = {u : v in N(f(u)), u != v}``.
        """
        xdeps: dict[int, set[int]] = {v: set() for v in graph.vertices}
        zdeps: dict[int, set[int]] = {v: set() for v in graph.vertices}
        for u, fu in f.items():
            xdeps[fu].add(u)
            for v in graph.neighbours(fu):
                if v != u:
                    zdeps[v].add(u)
        return cls(
            order=tuple(order),
            f=dict(f),
            xdeps={v: frozenset(s) for v, s in xdeps.items()},
            zdeps={v: frozenset(s) for v, s in zdeps.items()},
        )


@dataclass(frozen=True)
class MeasurementPattern:
    graph: Graph
    angles: Mapping[int, int]
    flow: FlowSpec
    name: str = ""

    @property
    def vertices(self) -> tuple[int, ...]:
        return self.graph.vertices

    @property
    def order(self) -> tuple[int, ...]:
        return self.flow.order


def correction_exponents(flow: FlowSpec, outcomes: Mapping[int, int], v: int) -> tuple[int, int]:
    """``(s_X, s_Z)`` for vertex ``v``: XOR of the decoded outcomes it depends on."""
    sx = sz = 0
    for u in flow.xdeps.get(v, ()):
        if u not in outcomes:
            raise PatternError(f"outcome of {u} needed for X correction of {v} is missing")
        sx ^= outcomes[u]
    for u in flow.zdeps.get(v, ()):
        if u not in outcomes:
            raise PatternError(f"outcome of {u} needed for Z correction of {v} is missing")
        sz ^= outcomes[u]
    return sx, sz


def validate_pattern(p: MeasurementPattern) -> list[str]:
    """Report every violated pattern invariant; an empty list means valid."""
    g = p.graph
    out = g.problems()
    vs = set(g.vertices)
    order = p.flow.order
    if sorted(order) != sorted(g.vertices) or len(set(order)) != len(order):
        out.append("measurement order is not a permutation of the vertices")
    pos = {v: i for i, v in enumerate(order)}

    for v in g.vertices:
        if v not in p.angles:
            out.append(f"angle missing for vertex {v}")
    for v, a in p.angles.items():
        if v not in vs:
            out.append(f"angle given for unknown vertex {v}")
        if not isinstance(a, int) or isinstance(a, bool) or not 0 <= a < N_ANGLES:
            out.append(f"angle of vertex {v} is not in 0..7")

    for u, fu in p.flow.f.items():
        if u not in vs or fu not in vs:
            out.append(f"flow entry {u} -> {fu} references unknown vertex")
            continue
        if u in g.outputs:
            out.append(f"flow defined on output vertex {u}")
        if fu not in g.neighbours(u):
            out.append(f"flow successor not neighbour: f({u}) = {fu}")
        if u in pos and fu in pos and pos[fu] <= pos[u]:
            out.append(f"flow successor f({u}) = {fu} does not come after {u}")

    for kind, deps in (("X", p.flow.xdeps), ("Z", p.flow.zdeps)):
        for v, ds in deps.items():
            for u in ds:
                if u not in pos or v not in pos:
                    out.append(f"{kind} dependency {u} -> {v} references unknown vertex")
                elif pos[u] >= pos[v]:
                    out.append(f"{kind} dependency {u} of {v} is not measured earlier")
    return out


# --- file format ------------------------------------------------------------

SCHEMA = "vbqc.pattern/1"
_FIELDS = {"vertices", "edges", "inputs", "outputs", "angles", "order", "f", "xdeps", "zdeps"}
_OPTIONAL = {"schema", "name"}


def pattern_to_dict(p: MeasurementPattern) -> dict:
    key = str
    return {
        "schema": SCHEMA,
        "name": p.name,
        "vertices": list(p.graph.vertices),
        "edges": [list(e) for e in p.graph.edges],
        "inputs": list(p.graph.inputs),
        "outputs": list(p.graph.outputs),
        "angles": {key(v): p.angles[v] for v in p.graph.vertices if v in p.angles},
        "order": list(p.flow.order),
        "f": {key(u): v for u, v in p.flow.f.items()},
        "xdeps": {key(v): sorted(s) for v, s in p.flow.xdeps.items()},
        "zdeps": {key(v): sorted(s) for v, s in p.flow.zdeps.items()},
    }


def pattern_from_dict(data: Mapping) -> MeasurementPattern:
    unknown = set(data) - _FIELDS - _OPTIONAL
    if unknown:
        raise PatternError(f"unknown pattern fields: {sorted(unknown)}")
    missing = {"vertices", "edges", "inputs", "outputs", "angles", "order"} - set(data)
    if missing:
        raise PatternError(f"missing pattern fields: {sorted(missing)}")
    if data.get("schema", SCHEMA) != SCHEMA:
        raise PatternError(f"unsupported schema {data['schema']!r}")

    graph = Graph(
        vertices=tuple(int(v) for v in data["vertices"]),
        edges=tuple((int(a), int(b)) for a, b in data["edges"]),
        inputs=tuple(int(v) for v in data["inputs"]),
        outputs=tuple(int(v) for v in data["outputs"]),
    )
    angles = {int(v): a for v, a in data["angles"].items()}
    f = {int(u): int(v) for u, v in data.get("f", {}).items()}
    order = tuple(int(v) for v in data["order"])
    if "xdeps" in data or "zdeps" in data:
        flow = FlowSpec(
            order=order,
            f=f,
            xdeps={int(v): frozenset(int(u) for u in s) for v, s in data.get("xdeps", {}).items()},
            zdeps={int(v): frozenset(int(u) for u in s) for v, s in data.get("zdeps", {}).items()},
        )
    else:
        flow = FlowSpec.from_flow(graph, f, order)
    return MeasurementPattern(graph=graph, angles=angles, flow=flow, name=data.get("name", ""))


def load_pattern(path: str | Path) -> MeasurementPattern:
    with open(path) as fh:
        return pattern_from_dict(json.load(fh))


def dump_pattern(p: MeasurementPattern, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(pattern_to_dict(p), fh, indent=2)
        fh.write("\n")
