"""Finite directed graphs and graph homomorphisms."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Mapping

from .errors import ContractError, Diagnostic, DomainError

Vertex = Hashable
Edge = tuple

MAX_CYCLES = 10**6


@dataclass(frozen=True, eq=False)
class Graph:
    """Directed graph ``(V, E)`` with ``E`` a subset of ``V x V`` (no parallel edges).

    ``labels`` optionally maps vertex ids to human-readable names; it takes no
    part in equality.
    """

    vertices: tuple
    edges: frozenset
    labels: Mapping = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def build(cls, vertices: Iterable[Vertex], edges: Iterable[Edge], labels=None) -> "Graph":
        vs = tuple(sorted(set(vertices)))
        es = frozenset((u, v) for u, v in edges)
        vset = set(vs)
        for u, v in es:
            if u not in vset or v not in vset:
                raise DomainError(f"edge {(u, v)} has an undeclared endpoint")
        return cls(vs, es, dict(labels or {}))

    @cached_property
    def vertex_set(self) -> frozenset:
        return frozenset(self.vertices)

    @cached_property
    def out_map(self) -> dict:
        out: dict = {v: [] for v in self.vertices}
        for u, v in self.edges:
            out[u].append(v)
        return {u: tuple(sorted(vs)) for u, vs in out.items()}

    @cached_property
    def in_map(self) -> dict:
        inn: dict = {v: [] for v in self.vertices}
        for u, v in self.edges:
            inn[v].append(u)
        return {v: tuple(sorted(us)) for v, us in inn.items()}

    def out_neighbors(self, v: Vertex) -> tuple:
        return self.out_map[v]

    def in_neighbors(self, v: Vertex) -> tuple:
        return self.in_map[v]

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Graph):
            return NotImplemented
        return self.vertices == other.vertices and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.vertices, self.edges))

    def __len__(self) -> int:
        return len(self.vertices)

    def to_json(self) -> dict:
        return {"vertices": list(self.vertices), "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_json(cls, data: dict) -> "Graph":
        return cls.build(data["vertices"], (tuple(e) for e in data["edges"]))


@dataclass(frozen=True, eq=False)
class GraphHom:
    source: Graph
    target: Graph
    mapping: Mapping

    def __call__(self, v: Vertex) -> Vertex:
        return self.mapping[v]

    def image_path(self, path: Iterable[Vertex]) -> list:
        return [self.mapping[v] for v in path]


def identity(g: Graph) -> GraphHom:
    return GraphHom(g, g, {v: v for v in g.vertices})


def is_path(g: Graph, vertices: list) -> bool:
    if not vertices:
        return False
    if any(v not in g.vertex_set for v in vertices):
        return False
    return all((u, v) in g.edges for u, v in zip(vertices, vertices[1:]))


def path_edges(vertices: list) -> set:
    return set(zip(vertices, vertices[1:]))


def validate_edge_surjective(g: Graph) -> list[Diagnostic]:
    """Vertices lacking an incoming or an outgoing edge; empty iff edge-surjective."""
    diags = []
    for v in g.vertices:
        if not g.in_map[v]:
            diags.append(Diagnostic(None, "edge-surjective", "no incoming edge", (v,)))
        if not g.out_map[v]:
            diags.append(Diagnostic(None, "edge-surjective", "no outgoing edge", (v,)))
    return diags


def _check_domain(h: GraphHom) -> None:
    if set(h.mapping) != h.source.vertex_set:
        raise DomainError("homomorphism map domain differs from the source vertex set")
    bad = [v for v in h.mapping.values() if v not in h.target.vertex_set]
    if bad:
        raise DomainError(f"map values {bad[:5]} are not target vertices")


def is_homomorphism(h: GraphHom) -> bool:
    _check_domain(h)
    m, tgt = h.mapping, h.target.edges
    return all((m[u], m[v]) in tgt for u, v in h.source.edges)


def is_bidirectional(h: GraphHom) -> bool:
    """Out-condition and in-condition of a bidirectional homomorphism."""
    if not is_homomorphism(h):
        raise ContractError("is_bidirectional requires a homomorphism")
    m, g = h.mapping, h.source
    for u in g.vertices:
        if len({m[v] for v in g.out_map[u]}) > 1:
            return False
        if len({m[w] for w in g.in_map[u]}) > 1:
            return False
    return True


def cycles_through(g: Graph, v: Vertex, limit: int = MAX_CYCLES) -> list[list]:
    """Every cycle that leaves ``v`` and first returns to ``v``, without repeating vertices.

    Cycles are returned as vertex lists ``[v, ..., v]`` sorted lexicographically.
    Raises :class:`DomainError` when more than ``limit`` cycles exist.
    """
    if v not in g.vertex_set:
        raise DomainError(f"vertex {v!r} not in graph")
    found: list[list] = []
    path = [v]
    on_path = {v}
    # iterative DFS over (vertex, next-neighbour-position) frames
    stack = [iter(g.out_map[v])]
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            on_path.discard(path.pop())
            continue
        if nxt == v:
            found.append(path + [v])
            if len(found) > limit:
                raise DomainError(f"more than {limit} cycles through {v!r}")
            continue
        if nxt in on_path:
            continue
        path.append(nxt)
        on_path.add(nxt)
        stack.append(iter(g.out_map[nxt]))
    found.sort()
    return found


def compose(h1: GraphHom, h2: GraphHom) -> GraphHom:
    """``h2 after h1``: maps ``v`` to ``h2(h1(v))``."""
    if h1.target != h2.source:
        raise DomainError("compose: h1.target differs from h2.source")
    m1, m2 = h1.mapping, h2.mapping
    return GraphHom(h1.source, h2.target, {v: m2[m1[v]] for v in h1.source.vertices})
