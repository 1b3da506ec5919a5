"""Nested exact intervals realizing the inverse limit inside the real line.

For every level ``m`` and vertex ``w^m_i`` the atlas holds an interval
``A_i^(m)`` and a much shorter centred interval ``D_i^(m)`` of length
``psi_m(w^m_i) = 2**(-2 s_{m+1}**2 - i s_{m+1}) * a_{m-1}``.  Each ``D`` is cut
into ``s_{m+1}`` equal slots and the children of a vertex occupy those slots.
A point of the inverse limit goes to the single point of the nested ``D``s.

Endpoints are never materialized eagerly: the atlas keeps each vertex's slot
path and folds it into exact endpoints on demand (memoized).
"""

from __future__ import annotations

import heapq
import json
import threading
from dataclasses import dataclass, field

from .dynamics import Thread, successor, thread_of
from .errors import CertificationError, ConstructionError, DepthError, DomainError
from .exact import ExactScalar, Interval, exact
from .gmtower import CoverTower, growth_check, tower_from_json, tower_to_json

A0 = ExactScalar(1, 6)
STRICT = "strict"
CHECKED = "checked"


# special-return vertices and indexing


@dataclass(frozen=True)
class VertexIndexing:
    level: int
    W_prime: frozenset
    W: frozenset
    order: tuple  # order[i-1] is the vertex w^m_i

    @property
    def index(self) -> dict:
        return {v: i for i, v in enumerate(self.order, start=1)}

    def vertex(self, i: int):
        return self.order[i - 1]


def special_return_vertices(tower: CoverTower, m: int) -> tuple[frozenset, frozenset]:
    """``(W'_m, W_m)``.

    ``W'_m`` holds the vertex at position ``l(m-1, 1)`` of each level-``m``
    cycle.  A vertex of ``W'_m`` joins ``W_m`` when some path from it to the
    special vertex avoids the rest of ``W'_m``.  The result must meet every
    cycle and project onto the lower special vertex, otherwise
    :class:`ConstructionError` is raised.
    """
    if not 1 <= m <= tower.height:
        raise DepthError(f"level {m} outside 1..{tower.height}")
    lev = tower.levels[m]
    p = tower.levels[m - 1].lengths[0]
    w_prime = set()
    for j, c in enumerate(lev.cycles, start=1):
        if p >= len(c) - 1:
            raise ConstructionError(
                f"degenerate structure: l({m - 1},1) = {p} reaches the end of cycle {j} at level {m}"
            )
        w_prime.add(c[p])
    g = lev.graph
    w = set()
    for v in w_prime:
        blocked = w_prime - {v}
        seen, todo = {v}, [v]
        while todo:
            u = todo.pop()
            if u == lev.special:
                w.add(v)
                break
            for nb in g.out_map[u]:
                if nb not in seen and nb not in blocked:
                    seen.add(nb)
                    todo.append(nb)
    problems = [j for j, c in enumerate(lev.cycles, start=1) if not (set(c) & w)]
    if problems:
        raise ConstructionError(f"level {m}: cycles {problems} contain no W vertex")
    h = tower.phi(m)
    off = sorted(v for v in w if h(v) != tower.levels[m - 1].special)
    if off:
        raise ConstructionError(f"level {m}: W vertices {off} do not project to the special vertex")
    return frozenset(w_prime), frozenset(w)


def index_vertices(tower: CoverTower, m: int) -> VertexIndexing:
    """Topological order of the level graph with in-edges of ``W_m`` removed, ``W_m`` first."""
    w_prime, w = special_return_vertices(tower, m)
    g = tower.levels[m].graph
    indeg = {v: 0 for v in g.vertices}
    for _, v in g.edges:
        if v not in w:
            indeg[v] += 1
    heap = [(v not in w, v) for v in g.vertices if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, u = heapq.heappop(heap)
        order.append(u)
        for v in g.out_map[u]:
            if v in w:
                continue
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, (v not in w, v))
    if len(order) != len(g.vertices):
        raise ConstructionError(f"level {m}: graph with W in-edges removed still has a cycle")
    return VertexIndexing(m, w_prime, w, tuple(order))


def indexing_violations(tower: CoverTower, ix: VertexIndexing) -> list[str]:
    """Re-check the indexing contract; empty when it holds."""
    out = []
    index = ix.index
    g = tower.levels[ix.level].graph
    for u, v in sorted(g.edges):
        if v not in ix.W and index[u] >= index[v]:
            out.append(f"edge {(u, v)} into non-W vertex does not raise the index")
    n_w = len(ix.W)
    if set(ix.order[:n_w]) != set(ix.W):
        out.append("W vertices do not occupy the smallest indices")
    if not ix.W <= ix.W_prime:
        out.append("W is not a subset of W'")
    return out


def psi(tower: CoverTower, m: int, i: int, a_prev: ExactScalar) -> ExactScalar:
    """``2**(-2 s_{m+1}**2 - i s_{m+1}) * a_{m-1}``."""
    if m + 1 > tower.height:
        raise DepthError(f"psi_{m} needs s_{m + 1}, but the tower stops at level {tower.height}")
    s_next = tower.s(m + 1)
    return a_prev.shift(-(2 * s_next * s_next + i * s_next))


# atlas


@dataclass
class LevelData:
    indexing: VertexIndexing
    parent: tuple  # parent[i-1]: index at level m-1 (0 at level 1)
    slot: tuple  # slot[i-1]: slot number in the parent's D (level 1: the integer i)
    diam_A: tuple
    diam_D: tuple


@dataclass
class Certificate:
    """One exactly evaluated inequality."""

    level: int
    name: str
    holds: bool
    detail: str = ""

    def to_record(self) -> dict:
        return {"level": self.level, "name": self.name, "holds": self.holds, "detail": self.detail}


@dataclass(eq=False)
class IntervalAtlas:
    tower: CoverTower
    depth: int
    mode: str
    levels: dict  # m -> LevelData, m = 1..depth
    a: tuple  # a_0..a_depth
    b: tuple  # b_0..b_depth
    certificates: list = field(default_factory=list)
    _lo_cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def s(self, m: int) -> int:
        return self.tower.s(m)

    def indexing(self, m: int) -> VertexIndexing:
        return self.levels[m].indexing

    def index_of(self, m: int, vertex) -> int:
        return self.levels[m].indexing.index[vertex]

    def _check(self, m: int, i: int) -> None:
        if not 1 <= m <= self.depth:
            raise DepthError(f"level {m} outside atlas depth {self.depth}")
        if not 1 <= i <= self.s(m):
            raise DomainError(f"index {i} outside 1..{self.s(m)} at level {m}")

    def diam_A(self, m: int, i: int) -> ExactScalar:
        self._check(m, i)
        return self.levels[m].diam_A[i - 1]

    def diam_D(self, m: int, i: int) -> ExactScalar:
        self._check(m, i)
        return self.levels[m].diam_D[i - 1]

    def _A_lo(self, m: int, i: int) -> ExactScalar:
        lev = self.levels[m]
        if m == 1:
            return exact(lev.slot[i - 1])
        return self._D_lo(m - 1, lev.parent[i - 1]) + lev.diam_A[i - 1] * lev.slot[i - 1]

    def _D_lo(self, m: int, i: int) -> ExactScalar:
        key = (m, i)
        hit = self._lo_cache.get(key)
        if hit is not None:
            return hit
        lev = self.levels[m]
        lo = self._A_lo(m, i) + (lev.diam_A[i - 1] - lev.diam_D[i - 1]).shift(-1)
        with self._lock:
            self._lo_cache[key] = lo
        return lo

    def A(self, m: int, i: int) -> Interval:
        self._check(m, i)
        lo = self._A_lo(m, i)
        return Interval(lo, lo + self.levels[m].diam_A[i - 1])

    def D(self, m: int, i: int) -> Interval:
        self._check(m, i)
        key = ("D", m, i)
        hit = self._lo_cache.get(key)
        if hit is None:
            lo = self._D_lo(m, i)
            hit = Interval(lo, lo + self.levels[m].diam_D[i - 1])
            with self._lock:
                self._lo_cache[key] = hit
        return hit

    def level0_bracket(self) -> Interval:
        """Hull of all level-1 intervals; plays the role of the missing ``D^(0)``."""
        s1 = self.s(1)
        return Interval(exact(1), exact(s1) + self.levels[1].diam_A[s1 - 1])

    def bracket(self, m: int, vertex) -> Interval:
        if m == 0:
            return self.level0_bracket()
        return self.D(m, self.index_of(m, vertex))

    def slot_path(self, m: int, i: int) -> tuple:
        path = []
        while m >= 1:
            lev = self.levels[m]
            path.append(lev.slot[i - 1])
            i = lev.parent[i - 1]
            m -= 1
        return tuple(reversed(path))

    def clear_cache(self) -> None:
        with self._lock:
            self._lo_cache.clear()


def _assign_level(tower: CoverTower, m: int, prev_ix: VertexIndexing | None, ix: VertexIndexing):
    s_m = tower.s(m)
    if m == 1:
        return tuple([0] * s_m), tuple(range(1, s_m + 1))
    h = tower.phi(m)
    prev_index = prev_ix.index
    parent = [prev_index[h(v)] for v in ix.order]
    children: dict = {}
    for i, r in enumerate(parent, start=1):
        children.setdefault(r, []).append(i)
    slot = [0] * s_m
    for r, kids in children.items():
        if len(kids) > s_m:
            raise ConstructionError(f"level {m}: vertex {r} has {len(kids)} preimages, more than s_{m} = {s_m}")
        for k, i in enumerate(sorted(kids)):
            slot[i - 1] = k
    return tuple(parent), tuple(slot)


def build_atlas(tower: CoverTower, depth: int, mode: str = STRICT) -> IntervalAtlas:
    """Build the nested intervals down to level ``depth``.

    Needs level ``depth + 1`` in the tower (``psi_depth`` reads ``s_{depth+1}``).
    ``strict`` requires the growth condition and certifies the hole-size
    chain; ``checked`` drops the growth requirement and instead certifies
    ``diam D < diam A / 3`` for every vertex.  Either mode raises
    :class:`CertificationError` naming the failed inequality.
    """
    if mode not in (STRICT, CHECKED):
        raise DomainError(f"unknown atlas mode {mode!r}")
    if depth < 1:
        raise DepthError("atlas depth must be >= 1")
    if depth + 1 > tower.height:
        raise DepthError(
            f"atlas depth {depth} needs tower height >= {depth + 1} (psi reads s_{depth + 1}); height is {tower.height}"
        )
    certs: list[Certificate] = []
    if mode == STRICT:
        ok = growth_check(tower)
        certs.append(Certificate(0, "growth s_{m+1} > 4 s_m^2", ok, str(tower.vertex_counts)))
        if not ok:
            raise CertificationError(
                f"strict mode needs s_(m+1) > 4 s_m^2; vertex counts {tower.vertex_counts}",
                where="tower",
                inequality="growth",
            )
    levels: dict = {}
    a = [A0]
    b = [A0.shift(-2)]  # b_0 = 2**(-2 s_0**2) a_0 with s_0 = 1
    prev_ix = None
    for m in range(1, depth + 1):
        ix = index_vertices(tower, m)
        parent, slot = _assign_level(tower, m, prev_ix, ix)
        s_m = tower.s(m)
        if m == 1:
            diam_A = tuple([A0 * 3] * s_m)
        else:
            pd = levels[m - 1].diam_D
            diam_A = tuple(pd[r - 1] / s_m for r in parent)
        diam_D = tuple(psi(tower, m, i, a[m - 1]) for i in range(1, s_m + 1))
        levels[m] = LevelData(ix, parent, slot, diam_A, diam_D)
        # the largest A comes from the smallest parent index since psi decreases in i
        a_m = (diam_A[0] if m == 1 else levels[m - 1].diam_D[min(parent) - 1] / s_m) / 3
        a.append(a_m)
        b.append(a_m.shift(-(tower.s(m + 1) ** 2)))
        prev_ix = ix
    atlas = IntervalAtlas(tower, depth, mode, levels, tuple(a), tuple(b), certs)
    for m in range(1, depth + 1):
        _certify_margins(atlas, m)
        if mode == STRICT:
            _certify_hole_size(atlas, m)
    return atlas


def _certify_margins(atlas: IntervalAtlas, m: int) -> None:
    lev = atlas.levels[m]
    for i, (da, dd) in enumerate(zip(lev.diam_A, lev.diam_D), start=1):
        if not dd * 3 < da:
            atlas.certificates.append(Certificate(m, "margin diam D < diam A / 3", False, f"vertex index {i}"))
            raise CertificationError(
                f"margin dominance fails at level {m}, vertex index {i}: diam D >= diam A / 3",
                where=f"level {m}, index {i}",
                inequality="margin",
            )
    atlas.certificates.append(Certificate(m, "margin diam D < diam A / 3", True, f"all {len(lev.diam_A)} vertices"))


def _certify_hole_size(atlas: IntervalAtlas, level: int) -> None:
    """Hole-size chain for the intervals at ``level`` (= m + 1 in the usual indexing).

    The conclusions certified are ``diam A > 3 * 2**(-2 s_{m+2}) a_m`` and
    ``psi_{m+1} < 2**(-2 s_{m+2}) a_m``; intermediate links are evaluated and
    logged individually.
    """
    tower = atlas.tower
    m = level - 1
    lev = atlas.levels[level]
    s1 = tower.s(m + 1)
    s2 = tower.s(m + 2)
    a_m = atlas.a[m]
    floor = a_m.shift(-2 * s2)
    ends = all(da > floor * 3 for da in lev.diam_A)
    psi_ok = all(dd < floor for dd in lev.diam_D)
    if m >= 1:
        a_prev = atlas.a[m - 1]
        lower = atlas.levels[m]
        eq_ok = all(da == lower.diam_D[r - 1] / s1 for da, r in zip(lev.diam_A, lev.parent))
        link2 = all(da >= a_prev.shift(-(3 * s1 * s1 + s1)) for da in lev.diam_A)
        link3 = a_prev.shift(-(3 * s1 * s1 + s1)) >= a_prev.shift(-4 * s1 * s1)
        link4 = a_prev.shift(-4 * s1 * s1) > a_prev.shift(-2 * s2)
        link5 = a_prev >= a_m * 3
        for name, ok in (
            ("diam A = diam D_parent / s", eq_ok),
            ("diam A >= 2^(-3s^2-s) a_(m-1)", link2),
            ("2^(-3s^2-s) >= 2^(-4s^2)", link3),
            ("2^(-4s^2) a_(m-1) > 2^(-2 s_(m+2)) a_(m-1)", link4),
            ("a_(m-1) >= 3 a_m", link5),
        ):
            atlas.certificates.append(Certificate(level, f"hole-size link: {name}", ok))
    atlas.certificates.append(Certificate(level, "hole-size: diam A > 3 * 2^(-2 s_(m+2)) a_m", ends))
    atlas.certificates.append(Certificate(level, "hole-size: psi < 2^(-2 s_(m+2)) a_m", psi_ok))
    if not (ends and psi_ok):
        raise CertificationError(
            f"hole-size inequality fails at level {level}",
            where=f"level {level}",
            inequality="hole-size",
        )


def bracket_bound_check(atlas: IntervalAtlas) -> list[Certificate]:
    """``diam D^(m) <= 2**-s_m a_m <= 2**-m`` at every level, evaluated exactly."""
    out = []
    for m in range(1, atlas.depth + 1):
        bound = atlas.a[m].shift(-atlas.s(m))
        first = all(d <= bound for d in atlas.levels[m].diam_D)
        second = bound <= ExactScalar.pow2(-m)
        out.append(Certificate(m, "diam D <= 2^(-s_m) a_m", first))
        out.append(Certificate(m, "2^(-s_m) a_m <= 2^(-m)", second))
    return out


# points and the conjugated map


def pi_bracket(atlas: IntervalAtlas, x: Thread) -> Interval:
    """The depth-``d`` bracket ``D^(d)_{x_d}`` containing the image point of ``x``."""
    if x.depth > atlas.depth:
        raise DepthError(f"thread depth {x.depth} exceeds atlas depth {atlas.depth}")
    return atlas.bracket(x.depth, x.top)


def f_bracket(atlas: IntervalAtlas, x: Thread) -> Interval:
    """Bracket of the shifted cylinder: ``pi_bracket(successor(x))``."""
    return pi_bracket(atlas, successor(x))


def image_bracket(atlas: IntervalAtlas, x: Thread) -> Interval:
    """Smallest certified bracket for the image of the cylinder ``x`` without eroding.

    The shift of ``x`` has some out-neighbour of ``x_d`` at level ``d``, so
    the hull of those neighbours' brackets contains the image.
    """
    d = x.depth
    if d > atlas.depth:
        raise DepthError(f"thread depth {d} exceeds atlas depth {atlas.depth}")
    if d == 0:
        return atlas.level0_bracket()
    nbrs = atlas.tower.levels[d].graph.out_map[x.top]
    out = atlas.bracket(d, nbrs[0])
    for v in nbrs[1:]:
        out = out.hull(atlas.bracket(d, v))
    return out


# gap filling


@dataclass(frozen=True)
class GapCubic:
    """``p = c0 + c1 u + c2 u**2 + c3 u**3`` in the unit variable ``u = (t - gap.lo) / h``.

    Keeping the coefficients in ``u`` avoids dividing by powers of the gap
    length ``h``, whose odd part can run to millions of bits.  The slope in
    ``t`` is the slope in ``u`` divided by ``h``, so the end slopes vanish
    exactly when ``c1 == 0`` and ``c1 + 2 c2 + 3 c3 == 0``.
    """

    gap: Interval
    left_value: ExactScalar
    right_value: ExactScalar
    coeffs: tuple

    def value_u(self, u) -> ExactScalar:
        u = exact(u)
        c0, c1, c2, c3 = self.coeffs
        return c0 + u * (c1 + u * (c2 + u * c3))

    def slope_u(self, u) -> ExactScalar:
        u = exact(u)
        _, c1, c2, c3 = self.coeffs
        return c1 + u * (c2 * 2 + u * c3 * 3)

    def _unit(self, t) -> ExactScalar:
        t = exact(t)
        if t == self.gap.lo:
            return exact(0)
        if t == self.gap.hi:
            return exact(1)
        return (t - self.gap.lo) / self.gap.length

    def value(self, t) -> ExactScalar:
        return self.value_u(self._unit(t))

    def derivative(self, t) -> ExactScalar:
        du = self.slope_u(self._unit(t))
        return du if du.is_zero() else du / self.gap.length

    def max_slope(self) -> ExactScalar:
        """``|p'|`` peaks at the midpoint of the gap: ``3 |dy| / (2 h)``."""
        return abs(self.right_value - self.left_value) * 3 / (self.gap.length * 2)


def hermite_zero_slopes(gap: Interval, y0: ExactScalar, y1: ExactScalar) -> GapCubic:
    """Cubic from ``y0`` to ``y1`` across ``gap`` with zero slope at both ends."""
    if gap.length.is_zero():
        raise DomainError("gap filler needs a gap of positive length")
    dy = y1 - y0
    return GapCubic(gap, y0, y1, (y0, exact(0), dy * 3, -(dy * 2)))


def jarnik_extend(atlas: IntervalAtlas, depth: int) -> list[GapCubic]:
    """Cubic fillers with zero end slopes between consecutive depth-``depth`` brackets.

    Each cubic takes the midpoint of the flanking cylinder's ``f_bracket`` at
    the corresponding gap end.
    """
    if not 1 <= depth <= atlas.depth:
        raise DepthError(f"gap filling depth {depth} outside 1..{atlas.depth}")
    tower = atlas.tower
    cyl = []
    for v in tower.levels[depth].graph.vertices:
        x = thread_of(tower, depth, v)
        cyl.append((pi_bracket(atlas, x), f_bracket(atlas, x).midpoint))
    cyl.sort(key=lambda item: item[0].lo)
    out = []
    for (left, y0), (right, y1) in zip(cyl, cyl[1:]):
        out.append(hermite_zero_slopes(Interval(left.hi, right.lo), y0, y1))
    return out


# JSON


def atlas_to_json(atlas: IntervalAtlas, *, materialize: bool = False) -> dict:
    levels = []
    for m in range(1, atlas.depth + 1):
        lev = atlas.levels[m]
        rows = []
        for i, v in enumerate(lev.indexing.order, start=1):
            row = {"index": i, "vertex": v, "parent": lev.parent[i - 1], "slot_path": list(atlas.slot_path(m, i))}
            if materialize:
                row["A"] = atlas.A(m, i).to_record()
                row["D"] = atlas.D(m, i).to_record()
            rows.append(row)
        levels.append(
            {
                "level": m,
                "W_prime": sorted(lev.indexing.W_prime),
                "W": sorted(lev.indexing.W),
                "vertices": rows,
            }
        )
    return {
        "tower": tower_to_json(atlas.tower),
        "depth": atlas.depth,
        "mode": atlas.mode,
        "scales": {"a": [x.to_record() for x in atlas.a], "b": [x.to_record() for x in atlas.b]},
        "levels": levels,
        "certificates": [c.to_record() for c in atlas.certificates],
    }


def atlas_from_json(data: dict) -> IntervalAtlas:
    """Rebuild from the stored tower and check the stored layout matches."""
    tower = tower_from_json(data["tower"])
    atlas = build_atlas(tower, int(data["depth"]), data["mode"])
    for rec, x in zip(data["scales"]["a"], atlas.a):
        if ExactScalar.from_record(rec) != x:
            raise DomainError("stored scale a_m differs from the rebuilt atlas")
    for lv in data["levels"]:
        m = lv["level"]
        for row in lv["vertices"]:
            i = row["index"]
            if atlas.indexing(m).vertex(i) != row["vertex"] or list(atlas.slot_path(m, i)) != row["slot_path"]:
                raise DomainError(f"stored slot layout differs at level {m}, index {i}")
            if "D" in row and Interval.from_record(row["D"]) != atlas.D(m, i):
                raise DomainError(f"stored endpoints differ at level {m}, index {i}")
    return atlas


def atlas_summary(atlas: IntervalAtlas) -> dict:
    """Diameter magnitudes only (approximate log2 values are labelled as such)."""
    levels = []
    for m in range(1, atlas.depth + 1):
        lev = atlas.levels[m]
        rows = []
        for i in range(1, atlas.s(m) + 1):
            da, dd = lev.diam_A[i - 1], lev.diam_D[i - 1]
            rows.append(
                {
                    "index": i,
                    "diam_A_pow2": da.e,
                    "diam_A_log2_approx": round(da.log2_abs(), 9),
                    "diam_D_pow2": dd.e,
                    "diam_D_log2_approx": round(dd.log2_abs(), 9),
                }
            )
        levels.append({"level": m, "rows": rows})
    return {"depth": atlas.depth, "mode": atlas.mode, "vertex_counts": atlas.tower.vertex_counts, "levels": levels}


def dumps_atlas(atlas: IntervalAtlas, *, materialize: bool = False) -> str:
    return json.dumps(atlas_to_json(atlas, materialize=materialize), sort_keys=True, separators=(",", ":")) + "\n"
