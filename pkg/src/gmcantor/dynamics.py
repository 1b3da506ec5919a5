"""The inverse-limit space of a tower at finite depth.

A depth-``d`` thread is a consistent prefix ``(x_0, ..., x_d)``, i.e. a
cylinder of the inverse limit.  The shift map needs one level of lookdown at
the special vertex, so :func:`successor` turns a depth ``d+1`` thread into a
depth ``d`` one.  :func:`forward` and :func:`backward` keep the depth whenever
the top vertex has a unique neighbour in the needed direction, which is always
the case on single-cycle levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx

from .errors import DepthError, DomainError, UnsupportedOperation
from .graphcore import Graph
from .gmtower import CoverTower


@dataclass(frozen=True)
class Thread:
    prefix: tuple
    tower: CoverTower = field(compare=False, repr=False)

    @property
    def depth(self) -> int:
        return len(self.prefix) - 1

    @property
    def top(self):
        return self.prefix[-1]

    def __getitem__(self, i: int):
        return self.prefix[i]

    def truncate(self, d: int) -> "Thread":
        if not 0 <= d <= self.depth:
            raise DepthError(f"cannot truncate a depth-{self.depth} thread to depth {d}")
        return Thread(self.prefix[: d + 1], self.tower)


def thread_of(tower: CoverTower, level: int, vertex) -> Thread:
    """The unique thread whose level-``level`` coordinate is ``vertex``."""
    if not 0 <= level <= tower.height:
        raise DepthError(f"level {level} outside tower of height {tower.height}")
    if vertex not in tower.levels[level].graph.vertex_set:
        raise DomainError(f"{vertex!r} is not a level-{level} vertex")
    prefix = [vertex]
    for i in range(level, 0, -1):
        prefix.append(tower.phi(i)(prefix[-1]))
    return Thread(tuple(reversed(prefix)), tower)


def is_consistent(x: Thread) -> bool:
    t = x.tower
    if x.prefix[0] != t.levels[0].special:
        return False
    return all(t.phi(i)(x[i]) == x[i - 1] for i in range(1, x.depth + 1))


def enumerate_threads(tower: CoverTower, depth: int) -> list[Thread]:
    if not 0 <= depth <= tower.height:
        raise DepthError(f"depth {depth} outside tower of height {tower.height}")
    return [thread_of(tower, depth, v) for v in tower.levels[depth].graph.vertices]


def first_disagreement(x: Thread, y: Thread) -> int | None:
    """Least level where the prefixes differ, or ``None`` when equal."""
    if x.depth != y.depth:
        raise DomainError(f"threads of depth {x.depth} and {y.depth}")
    for i, (a, b) in enumerate(zip(x.prefix, y.prefix)):
        if a != b:
            return i
    return None


def metric(x: Thread, y: Thread) -> Fraction:
    """``2**-k`` for the first disagreeing level ``k``; 0 for equal threads."""
    k = first_disagreement(x, y)
    return Fraction(0) if k is None else Fraction(1, 2**k)


def _look(tower: CoverTower, prefix: tuple, i: int, outgoing: bool):
    """Neighbour of ``prefix[i]`` along the shift, using ``prefix[i+1]`` when needed."""
    g = tower.levels[i].graph
    nbrs = g.out_map[prefix[i]] if outgoing else g.in_map[prefix[i]]
    if len(nbrs) == 1:
        return nbrs[0]
    if i + 1 >= len(prefix):
        return None
    up = tower.levels[i + 1].graph
    above = up.out_map[prefix[i + 1]] if outgoing else up.in_map[prefix[i + 1]]
    return tower.phi(i + 1)(above[0])


def successor(x: Thread) -> Thread:
    """Shift of a depth ``d+1`` cylinder, as a depth ``d`` cylinder.

    Non-special coordinates have a single out-neighbour; at a special
    coordinate all out-neighbours of the level above project to the same
    vertex (start-letter condition), so any of them gives the answer.
    """
    if x.depth == 0:
        raise DomainError("successor needs a thread of depth >= 1 (no lookdown at depth 0)")
    t = x.tower
    y = []
    for i in range(x.depth):
        g = t.levels[i].graph
        v = x[i]
        if v != t.levels[i].special:
            y.append(g.out_map[v][0])
        else:
            y.append(t.phi(i + 1)(t.levels[i + 1].graph.out_map[x[i + 1]][0]))
    return Thread(tuple(y), t)


def predecessor(x: Thread) -> Thread:
    """Inverse shift of a depth ``d+1`` cylinder; defined for bidirectional towers only."""
    t = x.tower
    if not t.bd:
        raise UnsupportedOperation("predecessor requires a tower of bidirectional covers")
    if x.depth == 0:
        raise DomainError("predecessor needs a thread of depth >= 1")
    return Thread(tuple(_look(t, x.prefix, i, False) for i in range(x.depth)), t)


def _orbit_step(x: Thread, outgoing: bool) -> Thread:
    t = x.tower
    y = [_look(t, x.prefix, i, outgoing) for i in range(x.depth + 1)]
    if y[-1] is None:
        y.pop()
    return Thread(tuple(y), t)


def forward(x: Thread) -> Thread:
    """Shift keeping the depth when the top vertex has one out-neighbour, else eroding by one."""
    if x.depth == 0:
        return x
    return _orbit_step(x, True)


def backward(x: Thread) -> Thread:
    """Inverse shift keeping the depth when possible; bd towers only."""
    if not x.tower.bd:
        raise UnsupportedOperation("backward orbits require a tower of bidirectional covers")
    if x.depth == 0:
        return x
    return _orbit_step(x, False)


def cylinder_arrows(tower: CoverTower, depth: int) -> set:
    """Successor relation between depth-``depth`` cylinders, keyed by top vertex.

    Uses level ``depth+1`` for the lookdown when the tower has it; at the top
    level every edge is a possible transition.
    """
    if not 0 <= depth <= tower.height:
        raise DepthError(f"depth {depth} outside tower of height {tower.height}")
    if depth == tower.height:
        return set(tower.levels[depth].graph.edges)
    arrows = set()
    for x in enumerate_threads(tower, depth + 1):
        arrows.add((x[depth], successor(x)[depth]))
    return arrows


def cylinder_graph(tower: CoverTower, depth: int) -> Graph:
    return Graph.build(tower.levels[depth].graph.vertices, cylinder_arrows(tower, depth))


def minimality_bruteforce(tower: CoverTower, depth: int) -> bool:
    """Strong connectivity of the depth-``depth`` cylinder graph."""
    if depth == 0:
        return True
    g = cylinder_graph(tower, depth)
    dg = nx.DiGraph()
    dg.add_nodes_from(g.vertices)
    dg.add_edges_from(g.edges)
    return nx.is_strongly_connected(dg)
