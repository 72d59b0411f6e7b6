"""Graphs with input/output sets and their colourings.

Colourings are what turn a computation graph into test runs: every colour
class is an independent set, so putting traps on one class and dummies on
everything else isolates each trap.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property


@dataclass(frozen=True)
class Graph:
    """Undirected graph with ordered vertices and input/output subsets.

    The constructor does not reject malformed input; use
    :func:`vbqc.pattern.validate_pattern` or :meth:`problems` for a report.
    """

    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    inputs: tuple[int, ...] = ()
    outputs: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @cached_property
    def adjacency(self) -> dict[int, frozenset[int]]:
        adj: dict[int, set[int]] = {v: set() for v in self.vertices}
        for a, b in self.edges:
            if a == b or a not in adj or b not in adj:
                continue
            adj[a].add(b)
            adj[b].add(a)
        return {v: frozenset(ns) for v, ns in adj.items()}

    def neighbours(self, v: int) -> frozenset[int]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((self.degree(v) for v in self.vertices), default=0)

    def problems(self) -> list[str]:
        """List every violated graph invariant (empty when the graph is simple)."""
        out = []
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            out.append("duplicate vertex ids")
        seen: set[frozenset[int]] = set()
        for a, b in self.edges:
            if a == b:
                out.append(f"self-loop at vertex {a}")
                continue
            if a not in vs or b not in vs:
                out.append(f"edge ({a}, {b}) references unknown vertex")
                continue
            key = frozenset((a, b))
            if key in seen:
                out.append(f"duplicate edge ({a}, {b})")
            seen.add(key)
        for name, subset in (("input", self.inputs), ("output", self.outputs)):
            missing = [v for v in subset if v not in vs]
            if missing:
                out.append(f"{name} vertices {missing} not in graph")
        return out


@dataclass(frozen=True)
class Colouring:
    k: int
    assignment: Mapping[int, int] = field(default_factory=dict)

    def colour_class(self, colour: int) -> tuple[int, ...]:
        return tuple(v for v, c in self.assignment.items() if c == colour)

    def classes(self) -> list[tuple[int, ...]]:
        return [self.colour_class(c) for c in range(self.k)]


def validate_colouring(g: Graph, c: Colouring) -> bool:
    """True iff ``c`` partitions the vertices into ``c.k`` independent sets.

    Raises ``ValueError`` when the colouring's vertex set is not the graph's.
    """
    if set(c.assignment) != set(g.vertices):
        raise ValueError("colouring does not cover exactly the graph's vertices")
    if c.k < 1:
        return False
    if any(not 0 <= col < c.k for col in c.assignment.values()):
        return False
    return all(c.assignment[a] != c.assignment[b] for a, b in g.edges if a != b)


def greedy_colouring(g: Graph, order: Sequence[int] | None = None) -> Colouring:
    """First-fit colouring in ``order``; uses at most ``max_degree + 1`` colours."""
    order = tuple(g.vertices if order is None else order)
    assignment: dict[int, int] = {}
    for v in order:
        taken = {assignment[u] for u in g.neighbours(v) if u in assignment}
        col = 0
        while col in taken:
            col += 1
        assignment[v] = col
    k = max(assignment.values(), default=-1) + 1
    return Colouring(k=max(k, 1), assignment=assignment)


def bipartite_colouring(g: Graph, order: Sequence[int] | None = None) -> Colouring | None:
    """BFS 2-colouring, or ``None`` if ``g`` has an odd cycle."""
    order = tuple(g.vertices if order is None else order)
    pos = {v: i for i, v in enumerate(order)}
    assignment: dict[int, int] = {}
    for root in order:
        if root in assignment:
            continue
        assignment[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in sorted(g.neighbours(u), key=pos.__getitem__):
                if w not in assignment:
                    assignment[w] = 1 - assignment[u]
                    queue.append(w)
                elif assignment[w] == assignment[u]:
                    return None
    k = 2 if any(g.edges) else max(assignment.values(), default=0) + 1
    return Colouring(k=k, assignment={v: assignment[v] for v in order})


def colouring_from_classes(classes: Iterable[Iterable[int]]) -> Colouring:
    assignment = {}
    classes = [tuple(c) for c in classes]
    for col, members in enumerate(classes):
        for v in members:
            assignment[v] = col
    return Colouring(k=len(classes), assignment=assignment)
