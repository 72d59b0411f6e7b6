"""Built-in measurement patterns with deterministic classical outputs.

=====================  =======  ====================  ==============
pattern                vertices  colours (greedy)     output
=====================  =======  ====================  ==============
``linear_cluster``     odd L     2                    ``x`` or ``NOT x``
``five_vertex``        5         3                    ``(x1^x2, x1)``
``brickwork_fragment`` 10        2 (bipartite)        ``(x1, x1^x2)``
=====================  =======  ====================  ==============

The angles of the last two were picked by exhaustive search over Pauli
angles for a deterministic, input-dependent reversible output.
"""

from __future__ import annotations

from importlib import resources

from .graph import Graph
from .pattern import PI, FlowSpec, MeasurementPattern, load_pattern


def linear_cluster(length: int = 3, negate: bool = False) -> MeasurementPattern:
    """Path ``1 - 2 - ... - L`` carrying one bit from vertex 1 to vertex L.

    All angles zero give the identity for odd ``L``; ``negate`` puts ``pi``
    on the first vertex, which turns the output into ``NOT x``.
    """
    if length < 1 or length % 2 == 0:
        raise ValueError("linear cluster length must be odd and positive")
    vs = tuple(range(1, length + 1))
    g = Graph(vs, tuple((v, v + 1) for v in vs[:-1]), inputs=(1,), outputs=(length,))
    angles = {v: 0 for v in vs}
    if negate:
        angles[1] = PI
    flow = FlowSpec.from_flow(g, {v: v + 1 for v in vs[:-1]}, vs)
    name = f"linear_cluster_{length}" + ("_not" if negate else "")
    return MeasurementPattern(g, angles, flow, name)


def five_vertex() -> MeasurementPattern:
    """Two inputs ``{1, 2}``, outputs ``{4, 5}``; not bipartite (triangle 3-4-5)."""
    g = Graph(
        (1, 2, 3, 4, 5),
        ((1, 3), (2, 4), (3, 4), (3, 5), (4, 5)),
        inputs=(1, 2),
        outputs=(4, 5),
    )
    angles = {1: 2, 2: 2, 3: 0, 4: 0, 5: 6}
    flow = FlowSpec.from_flow(g, {1: 3, 3: 5, 2: 4}, (1, 2, 3, 4, 5))
    return MeasurementPattern(g, angles, flow, "five_vertex")


def _bw(r: int, c: int) -> int:
    return 2 * (c - 1) + r + 1


def brickwork_fragment() -> MeasurementPattern:
    """Two rows by five columns with vertical edges in columns 3 and 5.

    Vertex ``(row r, column c)`` has id ``2(c - 1) + r + 1``, so the
    measurement order is column by column.
    """
    vs = tuple(range(1, 11))
    edges = [(_bw(r, c), _bw(r, c + 1)) for r in (0, 1) for c in range(1, 5)]
    edges += [(_bw(0, 3), _bw(1, 3)), (_bw(0, 5), _bw(1, 5))]
    g = Graph(vs, tuple(sorted(edges)), inputs=(1, 2), outputs=(9, 10))
    angles = {v: 0 for v in vs}
    angles[_bw(1, 3)] = 2
    angles[_bw(0, 4)] = 6
    f = {_bw(r, c): _bw(r, c + 1) for r in (0, 1) for c in range(1, 5)}
    return MeasurementPattern(g, angles, FlowSpec.from_flow(g, f, vs), "brickwork_fragment")


BUILTINS = {
    "identity": lambda: linear_cluster(3),
    "not": lambda: linear_cluster(3, negate=True),
    "five_vertex": five_vertex,
    "brickwork": brickwork_fragment,
}

DATA_FILES = {
    "identity": "linear_cluster_identity.json",
    "not": "linear_cluster_not.json",
    "five_vertex": "five_vertex.json",
    "brickwork": "brickwork_fragment.json",
}


def builtin(name: str) -> MeasurementPattern:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown built-in pattern {name!r}; choose from {sorted(BUILTINS)}") from None


def data_path(name: str):
    """Path of the shipped JSON copy of a built-in pattern."""
    return resources.files("vbqc") / "data" / DATA_FILES[name]


def resolve_pattern(ref: str) -> MeasurementPattern:
    """A built-in name, or a path to a pattern file."""
    if ref in BUILTINS:
        return builtin(ref)
    return load_pattern(ref)
