"""Exact certification of separation, derivative-quotient and shrinking bounds."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .dynamics import Thread, enumerate_threads, first_disagreement, successor, thread_of
from .embedding import STRICT, IntervalAtlas, f_bracket, pi_bracket
from .errors import CertificationError, DepthError, DomainError
from .exact import ExactScalar, Interval, exact

ONE = exact(1)


def theoretical_bound(s: int) -> ExactScalar:
    """``3 s / 2**s``."""
    return exact(3 * s).shift(-s)


def contraction_floor(atlas: IntervalAtlas) -> int | None:
    """Least level ``k >= 2`` with ``3 s_k / 2**s_k < 1``, within the atlas.

    Level 1 is excluded: a first disagreement there only places the images
    in the level-0 hull, which carries no shrinking bound.
    """
    for k in range(2, atlas.depth + 1):
        if theoretical_bound(atlas.s(k)) < ONE:
            return k
    return None


def separation_lower_bound(atlas: IntervalAtlas, level: int, r: int, s: int) -> ExactScalar:
    """``(diam A_r - diam D_r) / 2`` for sibling indices ``r != s`` at ``level``.

    Raises :class:`CertificationError` unless the bound exceeds
    ``diam A_r / 3`` and the brackets ``D_r``, ``D_s`` are at least that far
    apart.
    """
    if not 1 <= level <= atlas.depth:
        raise DepthError(f"level {level} outside atlas depth {atlas.depth}")
    if r == s:
        raise DomainError("separation needs two distinct vertices")
    lev = atlas.levels[level]
    if lev.parent[r - 1] != lev.parent[s - 1]:
        raise DomainError(f"indices {r} and {s} at level {level} have different parents")
    key = ("sep", level, r, s)
    hit = atlas._lo_cache.get(key)
    if hit is not None:
        return hit
    da, dd = atlas.diam_A(level, r), atlas.diam_D(level, r)
    bound = (da - dd).shift(-1)
    # (da - dd) / 2 > da / 3  is equivalent to  da > 3 dd, which avoids megabit numerators
    if not da > dd * 3:
        raise CertificationError(
            f"separation bound not above diam A / 3 at level {level}, index {r}",
            where=f"level {level}, index {r}",
            inequality="separation > diam A / 3",
        )
    if atlas.D(level, r).gap(atlas.D(level, s)) < bound:
        raise CertificationError(
            f"brackets {r} and {s} at level {level} closer than the separation bound",
            where=f"level {level}",
            inequality="bracket gap >= separation bound",
        )
    atlas._lo_cache[key] = bound
    return bound


@dataclass
class QuotientReport:
    x: tuple
    y: tuple
    level: int  # first disagreement, i.e. j + 1
    numerator: ExactScalar
    denominator: ExactScalar
    bound: ExactScalar
    theoretical: ExactScalar
    crossing: bool
    r_index: int | None
    t_index: int | None
    within_theory: bool | None
    tight_bound: ExactScalar | None = None

    @property
    def agree_through(self) -> int:
        return self.level - 1

    def to_record(self, exact: bool = False) -> dict:
        """Magnitudes as approximate log2 values; ``exact`` adds full records (can be megabytes)."""
        rec = {"x": list(self.x), "y": list(self.y), "level": self.level, "crossing": self.crossing}
        rec["r_index"] = self.r_index
        rec["t_index"] = self.t_index
        rec["within_theory"] = self.within_theory
        for name in ("numerator", "denominator", "bound", "theoretical", "tight_bound"):
            val = getattr(self, name)
            rec[name + "_log2_approx"] = None if val is None else round(val.log2_abs(), 9)
            if exact:
                rec[name] = None if val is None else val.to_record()
        return rec


def _clip(x: Thread, depth: int) -> Thread:
    return x if x.depth <= depth else x.truncate(depth)


def quotient_exact(atlas: IntervalAtlas, x: Thread, y: Thread, *, tight: bool = False) -> QuotientReport:
    """Certified bound on ``|f(p) - f(q)| / |p - q|`` for points of the cylinders ``x`` and ``y``.

    With first disagreement at level ``j + 1`` both images lie in
    ``D^(j)`` of the shifted vertex and the points are separated by the
    sibling bound at level ``j + 1``.  The quotient of the two is compared to
    ``3 s_{j+1} / 2**s_{j+1}`` when ``j >= 1`` and the shifted level-``j``
    vertex is not in ``W_j`` (off a W-crossing).

    With ``tight`` the report also carries the sharper ratio of the image
    brackets' span to the gap of the thread brackets at full depth; it costs
    a division of multi-megabit rationals on deep strict atlases.
    """
    k = first_disagreement(x, y)
    if k is None:
        raise DomainError("quotient_exact needs distinct threads")
    if k > atlas.depth:
        raise DepthError(f"first disagreement at level {k} beyond atlas depth {atlas.depth}")
    j = k - 1
    tx, ty = successor(x), successor(y)
    if tx[j] != ty[j]:
        raise CertificationError("shifted threads disagree at the shared level", inequality="image containment")
    image = atlas.bracket(j, tx[j])
    numerator = image.length
    r, s = atlas.index_of(k, x[k]), atlas.index_of(k, y[k])
    denominator = separation_lower_bound(atlas, k, r, s)
    bound = numerator / denominator

    # containment of the deeper images and separation of the deeper brackets;
    # at depth k both are already covered by the separation certificate
    tight_val = None
    if x.depth > k or tight:
        fx, fy = f_bracket(atlas, _clip(x, atlas.depth + 1)), f_bracket(atlas, _clip(y, atlas.depth + 1))
        px, py = pi_bracket(atlas, _clip(x, atlas.depth)), pi_bracket(atlas, _clip(y, atlas.depth))
        if not (image.contains_interval(fx) and image.contains_interval(fy)):
            raise CertificationError("image brackets escape D^(j)", inequality="image containment")
        gap = px.gap(py)
        if gap < denominator:
            raise CertificationError("bracket gap below the separation bound", inequality="separation")
        if tight:
            tight_val = fx.span(fy) / gap

    s_k = atlas.s(k)
    theory = theoretical_bound(s_k)
    crossing = j >= 1 and tx[j] in atlas.indexing(j).W
    r_idx = atlas.index_of(j, x[j]) if j >= 1 else None
    t_idx = atlas.index_of(j, tx[j]) if j >= 1 else None
    within = None
    if j >= 1 and not crossing:
        within = bound <= theory
        if atlas.mode == STRICT and not within:
            raise CertificationError(
                f"quotient bound exceeds 3 s/2^s at level {k}",
                where=f"pair {x.prefix} / {y.prefix}",
                inequality="quotient <= 3 s / 2^s",
            )
    return QuotientReport(
        x.prefix, y.prefix, k, numerator, denominator, bound, theory, crossing, r_idx, t_idx, within, tight_val
    )


def _children(atlas: IntervalAtlas, depth: int) -> dict:
    tower = atlas.tower
    kids: dict = {}
    for m in range(1, depth + 1):
        h = tower.phi(m)
        for v in tower.levels[m].graph.vertices:
            kids.setdefault((m - 1, h(v)), []).append(v)
    return kids


def is_crossing(atlas: IntervalAtlas, x: Thread, y: Thread) -> bool:
    """Whether the shifted coordinate at the last shared level lies in ``W``."""
    k = first_disagreement(x, y)
    if k is None:
        raise DomainError("crossing test needs distinct threads")
    j = k - 1
    return j >= 1 and successor(x.truncate(k))[j] in atlas.indexing(j).W


def pair_sampler(atlas: IntervalAtlas, depth: int, min_level: int = 1):
    """Return ``draw(rng)`` giving a pair of distinct depth-``depth`` threads.

    The disagreement level is drawn uniformly from ``[min_level, depth]``
    (capped at the atlas depth), then a thread and a sibling branch at that
    level, then random descendants down to ``depth``.
    """
    tower = atlas.tower
    if not 1 <= min_level <= depth <= tower.height:
        raise DepthError(f"cannot sample depth-{depth} pairs disagreeing from level {min_level}")
    levels = list(range(min_level, min(depth, atlas.depth) + 1))
    if not levels:
        raise DepthError(f"no disagreement level in {min_level}..{min(depth, atlas.depth)}")
    kids = _children(atlas, depth)
    tops = tower.levels[depth].graph.vertices

    def draw(rng: random.Random) -> tuple[Thread, Thread]:
        for _ in range(10_000):
            k = rng.choice(levels)
            x = thread_of(tower, depth, rng.choice(tops))
            siblings = [v for v in kids[(k - 1, x[k - 1])] if v != x[k]]
            if not siblings:
                continue
            v = rng.choice(siblings)
            for m in range(k, depth):
                v = rng.choice(kids[(m, v)])
            return x, thread_of(tower, depth, v)
        raise DomainError("could not find a pair with sibling branches")

    return draw


def sample_pairs(atlas: IntervalAtlas, depth: int, samples: int, seed: int, min_level: int = 1) -> list:
    """``samples`` seeded pairs from :func:`pair_sampler`."""
    draw = pair_sampler(atlas, depth, min_level)
    rng = random.Random(seed)
    return [draw(rng) for _ in range(samples)]


@dataclass
class LrsReport:
    samples: int
    violations: list = field(default_factory=list)
    max_ratio: ExactScalar | None = None
    skipped_crossings: int = 0
    per_level_max: dict = field(default_factory=dict)
    min_level: int | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_record(self, exact: bool = False) -> dict:
        rec = {
            "ok": self.ok,
            "samples": self.samples,
            "min_level": self.min_level,
            "skipped_crossings": self.skipped_crossings,
            "violations": [v.to_record(exact) for v in self.violations],
            "max_ratio_below_1": None if self.max_ratio is None else self.max_ratio < ONE,
            "max_ratio_log2_approx": None if self.max_ratio is None else round(self.max_ratio.log2_abs(), 9),
            "per_level_max": {
                str(k): {"log2_approx": round(v.log2_abs(), 9)} for k, v in sorted(self.per_level_max.items())
            },
        }
        if exact:
            rec["max_ratio"] = None if self.max_ratio is None else self.max_ratio.to_record()
            for k, v in self.per_level_max.items():
                rec["per_level_max"][str(k)]["bound"] = v.to_record()
        return rec


def lrs_sample_check(atlas: IntervalAtlas, depth: int, samples: int, seed: int) -> LrsReport:
    """Certify ``|f(p) - f(q)| < |p - q|`` on sampled nearby pairs.

    Pairs disagree first at or beyond the least level where
    ``3 s/2**s < 1``.  A pair whose shifted coordinate at the shared level
    lies in ``W`` sits outside the shrinking radius of its points; such pairs
    are counted in ``skipped_crossings`` and not certified.
    """
    if not 2 <= depth <= atlas.tower.height:
        raise DepthError(f"lrs check depth {depth} must lie in 2..{atlas.tower.height}")
    floor = contraction_floor(atlas)
    report = LrsReport(samples, min_level=floor)
    if floor is None or floor > min(depth, atlas.depth):
        return report
    for x, y in sample_pairs(atlas, depth, samples, seed, floor):
        q = quotient_exact(atlas, x, y)
        if q.crossing:
            report.skipped_crossings += 1
            continue
        if report.max_ratio is None or q.bound > report.max_ratio:
            report.max_ratio = q.bound
        best = report.per_level_max.get(q.level)
        if best is None or q.bound > best:
            report.per_level_max[q.level] = q.bound
        if not q.bound < ONE:
            report.violations.append(q)
    return report


def quotient_sweep(atlas: IntervalAtlas, depth: int, samples: int, seed: int, min_level: int = 1) -> list:
    return [quotient_exact(atlas, x, y) for x, y in sample_pairs(atlas, depth, samples, seed, min_level)]


def per_level_maxima(reports: list) -> dict:
    """Largest off-crossing quotient bound for each disagreement level."""
    out: dict = {}
    for q in reports:
        if q.crossing:
            continue
        if q.level not in out or q.bound > out[q.level]:
            out[q.level] = q.bound
    return dict(sorted(out.items()))


def exhaustive_level_maxima(atlas: IntervalAtlas, depth: int | None = None) -> dict:
    """Per-level off-crossing maxima over every sibling pair, not a sample.

    The quotient only depends on the shared level-``j`` vertex and the two
    branches at level ``j + 1``, so one representative thread per branch is
    enough.
    """
    depth = atlas.depth if depth is None else depth
    tower = atlas.tower
    kids = _children(atlas, depth)
    out: dict = {}
    for k in range(1, depth + 1):
        for (m, parent), vs in kids.items():
            if m != k - 1 or len(vs) < 2:
                continue
            threads = [thread_of(tower, k, v) for v in vs]
            for x in threads:
                for y in threads:
                    if x.top == y.top:
                        continue
                    q = quotient_exact(atlas, x, y)
                    if q.crossing:
                        continue
                    if k not in out or q.bound > out[k]:
                        out[k] = q.bound
    return out


def disjointness_check(atlas: IntervalAtlas) -> bool:
    """Non-overlapping ``A`` at each level, each ``D`` in the interior of its ``A``.

    Sibling slots tile their parent bracket, so neighbouring closed ``A``
    intervals may share an endpoint; their interiors must not meet.  The
    ``D`` brackets are then pairwise disjoint as closed sets.
    """
    for m in range(1, atlas.depth + 1):
        intervals = []
        for i in range(1, atlas.s(m) + 1):
            a, d = atlas.A(m, i), atlas.D(m, i)
            if not a.strictly_contains_interval(d):
                return False
            intervals.append(a)
        intervals.sort(key=lambda iv: iv.lo)
        if any(not left.hi <= right.lo for left, right in zip(intervals, intervals[1:])):
            return False
    return True


def conjugacy_check(atlas: IntervalAtlas, depth: int, table: dict | None = None) -> bool:
    """Brackets commute with the shift on every depth-``depth`` cylinder.

    ``table`` maps each thread's prefix to its shifted prefix; by default it
    is computed with :func:`successor`.  The check asks that each entry is
    an edge-wise shift (``(x_i, y_i)`` an edge at every level), that
    ``f_bracket(x)`` is the bracket of that entry, and that deeper cylinders
    have nested image brackets.
    """
    if not 1 <= depth <= atlas.depth + 1:
        raise DepthError(f"conjugacy depth {depth} outside 1..{atlas.depth + 1}")
    tower = atlas.tower
    for x in enumerate_threads(tower, depth):
        y_prefix = table[x.prefix] if table is not None else successor(x).prefix
        if len(y_prefix) != depth:
            return False
        for i, (u, v) in enumerate(zip(x.prefix, y_prefix)):
            if (u, v) not in tower.levels[i].graph.edges:
                return False
        y = thread_of(tower, depth - 1, y_prefix[-1])
        if y.prefix != tuple(y_prefix):
            return False
        fb = f_bracket(atlas, x)
        if fb != pi_bracket(atlas, y):
            return False
        if depth + 1 <= tower.height and depth <= atlas.depth:
            for v in tower.levels[depth + 1].graph.vertices:
                if tower.phi(depth + 1)(v) != x.top:
                    continue
                if not fb.contains_interval(f_bracket(atlas, thread_of(tower, depth + 1, v))):
                    return False
    return True


def w_membership_check(atlas: IntervalAtlas) -> list:
    """Threads at atlas depth with more than one level ``n`` where ``z_n`` lies in ``W_n``."""
    bad = []
    for x in enumerate_threads(atlas.tower, atlas.depth):
        hits = [n for n in range(1, atlas.depth + 1) if x[n] in atlas.indexing(n).W]
        if len(hits) > 1:
            bad.append((x.prefix, hits))
    return bad
