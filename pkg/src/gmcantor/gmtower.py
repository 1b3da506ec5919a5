"""GM covering towers.

A tower is a finite truncation ``G_0 <- G_1 <- ... <- G_H`` of a GM-covering.
Level 0 is a single special vertex with a loop.  Every other level is a
special vertex plus cycles ``c_{i,1}, ..., c_{i,r_i}`` that start and end at
it; the homomorphism ``phi_i : G_i -> G_{i-1}`` wraps each cycle around a
word of level ``i-1`` cycles.

Towers built here give every cycle fresh vertices (only the special vertex is
shared), so the coincidence condition holds vacuously.  Towers with shared
vertices can be loaded from explicit JSON and are checked like any other.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from .errors import ContractError, Diagnostic, DomainError
from .graphcore import (
    Graph,
    GraphHom,
    compose,
    is_bidirectional,
    is_homomorphism,
    path_edges,
    validate_edge_surjective,
)

SPECIAL = 0


@dataclass(frozen=True, eq=False)
class GMLevel:
    graph: Graph
    special: int
    cycles: tuple  # each a tuple of vertices, special ... special

    @property
    def lengths(self) -> tuple:
        return tuple(len(c) - 1 for c in self.cycles)

    @property
    def r(self) -> int:
        return len(self.cycles)

    def first_vertex(self, j: int = 1) -> int:
        """``v_{i,j,1}``: the vertex after the special one on cycle ``j`` (1-based)."""
        return self.cycles[j - 1][1]


@dataclass(frozen=True, eq=False)
class CoverTower:
    """Levels ``0..H`` and homomorphisms ``homs[i-1] = phi_i : level i -> level i-1``."""

    levels: tuple
    homs: tuple
    words: tuple  # words[i-1] lists the level-i words, letters 1-based
    meta: dict = field(default_factory=dict)

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def level(self, i: int) -> GMLevel:
        return self.levels[i]

    def phi(self, i: int) -> GraphHom:
        if not 1 <= i <= self.height:
            raise DomainError(f"no homomorphism phi_{i} in a tower of height {self.height}")
        return self.homs[i - 1]

    def s(self, m: int) -> int:
        """Vertex count of level ``m`` (``s_0 = 1``)."""
        return len(self.levels[m].graph)

    @property
    def vertex_counts(self) -> list[int]:
        return [self.s(m) for m in range(self.height + 1)]

    def phi_between(self, m: int, n: int) -> GraphHom:
        """``phi_{m,n}``: level ``m`` down to level ``n`` (``n <= m``)."""
        if not 0 <= n <= m <= self.height:
            raise DomainError(f"phi_between({m}, {n}) out of range")
        g = self.levels[m].graph
        h = GraphHom(g, g, {v: v for v in g.vertices})
        for i in range(m, n, -1):
            h = compose(h, self.phi(i))
        return h

    @cached_property
    def bd(self) -> bool:
        """Every homomorphism is bidirectional (so the shift is invertible)."""
        try:
            return all(is_bidirectional(h) for h in self.homs)
        except ContractError:
            return False

    def is_fresh(self) -> bool:
        """True when cycles share no vertex other than the special one."""
        for lev in self.levels[1:]:
            seen: set = set()
            for c in lev.cycles:
                inner = set(c[1:-1])
                if inner & seen or lev.special in inner:
                    return False
                seen |= inner
        return True


def _level_zero() -> GMLevel:
    g = Graph.build([SPECIAL], [(SPECIAL, SPECIAL)], {SPECIAL: "v0"})
    return GMLevel(g, SPECIAL, ((SPECIAL, SPECIAL),))


def _check_words(words: Sequence[Sequence[Sequence[int]]], require_start: bool) -> None:
    if not words:
        raise DomainError("a tower needs at least one level of words")
    r_prev = 1
    for i, level_words in enumerate(words, start=1):
        if not level_words:
            raise DomainError(f"level {i} has no words")
        for w in level_words:
            if not w:
                raise DomainError(f"level {i}: empty word")
            bad = [a for a in w if not (isinstance(a, int) and 1 <= a <= r_prev)]
            if bad:
                raise DomainError(f"level {i}: letters {bad} outside alphabet 1..{r_prev}")
            if require_start and w[0] != 1:
                raise DomainError(f"level {i}: word {list(w)} does not start with letter 1")
        r_prev = len(level_words)


def build_tower_from_words(words, *, meta: dict | None = None, require_start: bool = True) -> CoverTower:
    """Assemble a tower whose level ``i`` cycle ``j`` follows ``words[i-1][j-1]``.

    Every cycle gets fresh vertices; ``phi_i`` sends position ``p`` of a cycle
    to the matching position of the lower cycle the word traverses there.
    ``require_start=False`` admits words violating the start-letter rule so
    the validator can report them (used by the JSON loader).
    """
    words = tuple(tuple(tuple(int(a) for a in w) for w in lw) for lw in words)
    _check_words(words, require_start)
    levels = [_level_zero()]
    homs = []
    for i, level_words in enumerate(words, start=1):
        lower = levels[-1]
        vertices = [SPECIAL]
        labels = {SPECIAL: f"v{i},0"}
        edges = []
        cycles = []
        mapping = {SPECIAL: lower.special}
        nxt = 1
        for j, w in enumerate(level_words, start=1):
            image = [lower.special]
            for a in w:
                image.extend(lower.cycles[a - 1][1:])
            length = len(image) - 1
            cyc = [SPECIAL]
            for p in range(1, length):
                v = nxt
                nxt += 1
                vertices.append(v)
                labels[v] = f"v{i},{j},{p}"
                mapping[v] = image[p]
                cyc.append(v)
            cyc.append(SPECIAL)
            edges.extend(zip(cyc, cyc[1:]))
            cycles.append(tuple(cyc))
        g = Graph.build(vertices, edges, labels)
        lev = GMLevel(g, SPECIAL, tuple(cycles))
        homs.append(GraphHom(g, lower.graph, mapping))
        levels.append(lev)
    return CoverTower(tuple(levels), tuple(homs), words, dict(meta or {"generator": "words"}))


def odometer_tower(bases: Sequence[int]) -> CoverTower:
    """Single-cycle tower; level ``i`` wraps ``bases[i-1]`` times around level ``i-1``."""
    if not bases:
        raise DomainError("odometer_tower needs at least one base")
    for b in bases:
        if int(b) < 2:
            raise DomainError(f"odometer base {b} < 2")
    words = [[[1] * int(b)] for b in bases]
    return build_tower_from_words(words, meta={"generator": "odometer", "bases": [int(b) for b in bases]})


def random_simple_tower(seed: int, levels: int, cycle_counts: Sequence[int], length_budget: int) -> CoverTower:
    """Random tower whose words start with 1 and use every letter of the lower alphabet.

    ``cycle_counts[i-1]`` is ``r_i``.  Word lengths are drawn uniformly from
    ``[max(2, r_{i-1}), length_budget]``.  Randomness comes from
    :class:`random.Random` (Mersenne Twister) seeded with ``seed``, so output
    is reproducible for a fixed seed and Python version.
    """
    if levels < 1 or len(cycle_counts) != levels:
        raise DomainError("cycle_counts must list r_1..r_L for L = levels >= 1")
    if any(r < 1 for r in cycle_counts):
        raise DomainError("cycle counts must be >= 1")
    rng = random.Random(seed)
    words = []
    r_prev = 1
    for i in range(levels):
        min_len = max(2, r_prev)
        if length_budget < min_len:
            raise DomainError(f"length budget {length_budget} cannot fit {r_prev} letters at level {i + 1}")
        level_words = []
        for _ in range(cycle_counts[i]):
            n = rng.randint(min_len, length_budget)
            pool = list(range(2, r_prev + 1))
            pool += [rng.randint(1, r_prev) for _ in range(n - 1 - len(pool))]
            rng.shuffle(pool)
            level_words.append([1] + pool)
        words.append(level_words)
        r_prev = cycle_counts[i]
    return build_tower_from_words(
        words,
        meta={"generator": "random", "seed": seed, "cycle_counts": list(cycle_counts), "length_budget": length_budget},
    )


def _v11(tower: CoverTower, i: int):
    # v_{i,1,1}; for level 0 we read it as v_0 itself
    lev = tower.levels[i]
    return lev.special if i == 0 else lev.cycles[0][1]


def _validate_level(i: int, lev: GMLevel) -> list[Diagnostic]:
    diags = []
    g = lev.graph
    if lev.special not in g.vertex_set:
        return [Diagnostic(i, "structure", "special vertex not in graph", (lev.special,))]
    for d in validate_edge_surjective(g):
        diags.append(Diagnostic(i, d.condition, d.message, d.witnesses))
    if not lev.cycles:
        diags.append(Diagnostic(i, "1", "level has no cycles"))
    covered: set = set()
    for j, c in enumerate(lev.cycles, start=1):
        if len(c) < 2 or c[0] != lev.special or c[-1] != lev.special:
            diags.append(Diagnostic(i, "1", f"cycle {j} does not start and end at the special vertex", (j,)))
            continue
        if lev.special in c[1:-1]:
            diags.append(Diagnostic(i, "1", f"cycle {j} passes the special vertex before its end", (j,)))
        missing = [e for e in zip(c, c[1:]) if e not in g.edges]
        if missing:
            diags.append(Diagnostic(i, "1", f"cycle {j} steps along non-edges", tuple(missing[:3])))
        covered |= path_edges(list(c))
    extra = sorted(g.edges - covered)
    if extra:
        diags.append(Diagnostic(i, "2", "edges not covered by any cycle", tuple(extra[:5])))
    # condition (3): once two cycles meet they agree until the special vertex
    occurrences: dict = {}
    for j, c in enumerate(lev.cycles):
        for k in range(1, len(c) - 1):
            occurrences.setdefault(c[k], []).append((j, k))
    for v, occ in occurrences.items():
        j0, k0 = occ[0]
        tail0 = lev.cycles[j0][k0:]
        for j, k in occ[1:]:
            if lev.cycles[j][k:] != tail0:
                diags.append(
                    Diagnostic(
                        i,
                        "3",
                        f"cycles {j0 + 1} and {j + 1} meet at {v} and then diverge",
                        ((j0 + 1, k0), (j + 1, k)),
                    )
                )
    return diags


def validate_gm(tower: CoverTower) -> list[Diagnostic]:
    """Check conditions (1)-(5), edge-surjectivity, and homomorphism-ness of each level.

    Returns an empty list iff the tower is a valid GM tower.  Structural
    mismatches (wrong number of homs, maps between the wrong graphs) raise
    :class:`DomainError` instead.
    """
    if len(tower.homs) != len(tower.levels) - 1:
        raise DomainError("tower needs exactly one homomorphism per level above 0")
    diags: list[Diagnostic] = []
    lev0 = tower.levels[0]
    if lev0.graph.vertices != (lev0.special,) or lev0.graph.edges != frozenset({(lev0.special, lev0.special)}):
        diags.append(Diagnostic(0, "level0", "level 0 must be one special vertex with a loop"))
    for i in range(1, len(tower.levels)):
        lev, h = tower.levels[i], tower.homs[i - 1]
        if h.source is not lev.graph and h.source != lev.graph:
            raise DomainError(f"phi_{i} does not start at level {i}")
        if h.target is not tower.levels[i - 1].graph and h.target != tower.levels[i - 1].graph:
            raise DomainError(f"phi_{i} does not land in level {i - 1}")
        diags.extend(_validate_level(i, lev))
        if not is_homomorphism(h):
            bad = [e for e in sorted(lev.graph.edges) if (h(e[0]), h(e[1])) not in h.target.edges]
            diags.append(Diagnostic(i, "hom", "phi does not preserve edges", tuple(bad[:3])))
        lower_special = tower.levels[i - 1].special
        if h(lev.special) != lower_special:
            diags.append(Diagnostic(i, "4", "phi does not send special to special", (lev.special, h(lev.special))))
        target = _v11(tower, i - 1)
        for j, c in enumerate(lev.cycles, start=1):
            if len(c) >= 2 and h(c[1]) != target:
                diags.append(
                    Diagnostic(i, "5", f"cycle {j} does not start over v_{{{i - 1},1,1}}", (j, c[1], h(c[1])))
                )
    return diags


def read_words(tower: CoverTower, i: int) -> list[list[int]]:
    """Decompose ``phi_i(c_{i,j})`` into level ``i-1`` cycles; returns 1-based letters."""
    lev, lower, h = tower.levels[i], tower.levels[i - 1], tower.phi(i)
    out = []
    for c in lev.cycles:
        image = h.image_path(c)
        word = []
        start = 0
        for p in range(1, len(image)):
            if image[p] == lower.special:
                seg = tuple(image[start : p + 1])
                try:
                    word.append(lower.cycles.index(seg) + 1)
                except ValueError:
                    raise DomainError(f"level {i}: image segment {seg} is not a level-{i - 1} cycle") from None
                start = p
        if start != len(image) - 1:
            raise DomainError(f"level {i}: cycle image does not end at the special vertex")
        out.append(word)
    return out


def is_simple(tower: CoverTower, i: int, m: int) -> bool:
    """True iff ``phi_{m,i}`` maps every level-``m`` cycle onto all edges of level ``i``."""
    if i >= m:
        raise DomainError(f"is_simple needs i < m, got i={i}, m={m}")
    if not 0 <= i or m > tower.height:
        raise DomainError("levels out of range")
    h = tower.phi_between(m, i)
    full = tower.levels[i].graph.edges
    return all(path_edges(h.image_path(c)) == full for c in tower.levels[m].cycles)


def telescope(tower: CoverTower, keep: Sequence[int]) -> CoverTower:
    """Keep only the listed levels, composing the homomorphisms in between."""
    keep = list(keep)
    if not keep or keep[0] != 0:
        raise DomainError("telescope: keep must start at level 0")
    if any(b <= a for a, b in zip(keep, keep[1:])) or keep[-1] > tower.height:
        raise DomainError("telescope: keep must be strictly increasing within the tower")
    levels = tuple(tower.levels[k] for k in keep)
    homs = tuple(tower.phi_between(b, a) for a, b in zip(keep, keep[1:]))
    meta = dict(tower.meta)
    meta["telescoped"] = keep
    draft = CoverTower(levels, homs, (), meta)
    words = tuple(tuple(tuple(w) for w in read_words(draft, k)) for k in range(1, len(levels)))
    return CoverTower(levels, homs, words, meta)


def growth_check(tower: CoverTower) -> bool:
    """``s_{m+1} > 4 s_m**2`` for each ``m >= 1`` present in the tower."""
    s = tower.vertex_counts
    return all(s[m + 1] > 4 * s[m] ** 2 for m in range(1, len(s) - 1))


def is_bd_tower(tower: CoverTower) -> bool:
    return tower.bd


# JSON


def tower_to_json(tower: CoverTower) -> dict:
    """Words form for fresh-vertex towers, explicit graphs otherwise."""
    meta = {k: tower.meta[k] for k in sorted(tower.meta)}
    if tower.words and tower.is_fresh():
        return {"levels": [{"words": [list(w) for w in lw]} for lw in tower.words], "meta": meta}
    levels = []
    for i in range(1, tower.height + 1):
        lev, h = tower.levels[i], tower.phi(i)
        levels.append(
            {
                "graph": lev.graph.to_json(),
                "special": lev.special,
                "cycles": [list(c) for c in lev.cycles],
                "hom": [[v, h(v)] for v in lev.graph.vertices],
            }
        )
    return {"levels": levels, "meta": meta}


class TowerLoadError(DomainError):
    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        super().__init__("tower fails GM validation:\n" + "\n".join(map(str, diagnostics)))
        self.diagnostics = diagnostics


def tower_from_json(data: dict, *, validate: bool = True) -> CoverTower:
    levels_data = data.get("levels")
    if not isinstance(levels_data, list) or not levels_data:
        raise DomainError("tower JSON needs a non-empty 'levels' list")
    meta = dict(data.get("meta", {}))
    if all("words" in lv for lv in levels_data):
        tower = build_tower_from_words([lv["words"] for lv in levels_data], meta=meta, require_start=False)
    elif all("graph" in lv for lv in levels_data):
        tower = _explicit_tower(levels_data, meta)
    else:
        raise DomainError("tower JSON levels must all use 'words' or all use 'graph'")
    if validate:
        diags = validate_gm(tower)
        if diags:
            raise TowerLoadError(diags)
    return tower


def _explicit_tower(levels_data: list, meta: dict) -> CoverTower:
    levels = [_level_zero()]
    homs = []
    for i, lv in enumerate(levels_data, start=1):
        g = Graph.from_json(lv["graph"])
        lev = GMLevel(g, lv["special"], tuple(tuple(c) for c in lv["cycles"]))
        mapping = {u: v for u, v in lv["hom"]}
        if set(mapping) != g.vertex_set:
            raise DomainError(f"level {i}: hom is not total on the level's vertices")
        homs.append(GraphHom(g, levels[-1].graph, mapping))
        levels.append(lev)
    draft = CoverTower(tuple(levels), tuple(homs), (), meta)
    try:
        words = tuple(tuple(tuple(w) for w in read_words(draft, k)) for k in range(1, len(levels)))
    except DomainError:
        words = ()
    return CoverTower(tuple(levels), tuple(homs), words, meta)


def dumps_tower(tower: CoverTower) -> str:
    return json.dumps(tower_to_json(tower), sort_keys=True, separators=(",", ":")) + "\n"


def loads_tower(text: str, *, validate: bool = True) -> CoverTower:
    return tower_from_json(json.loads(text), validate=validate)
