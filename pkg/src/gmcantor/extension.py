"""A non-transitive extension with spiralling periodic orbits of growing period.

The base system lives at height ``-1``.  Around a base point ``z`` we pick
nested cylinders ``U_n``, two backward return times ``sigma_n < kappa_n``
per level and a gap ``h_n``, then place a periodic orbit of period
``kappa_n - sigma_n`` at heights just above the base.  Every inequality the
construction depends on is checked with exact bracket enclosures at the
atlas depth.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .dynamics import Thread, backward, forward, thread_of
from .embedding import Certificate, IntervalAtlas, image_bracket, pi_bracket
from .errors import CertificationError, ConstructionError, DepthError, SearchFailure, UnsupportedOperation
from .exact import ExactScalar, exact
from .gmtower import CoverTower
from .verify import _children, contraction_floor, exhaustive_level_maxima, first_disagreement, is_crossing, pair_sampler

ONE = exact(1)
HALF = exact(Fraction(1, 2))


def canonical_base_point(tower: CoverTower, depth: int) -> Thread:
    """The thread of special vertices."""
    if not 0 <= depth <= tower.height:
        raise DepthError(f"depth {depth} outside tower of height {tower.height}")
    x = thread_of(tower, depth, tower.levels[depth].special)
    if any(v != tower.levels[i].special for i, v in enumerate(x.prefix)):
        raise ConstructionError("special vertices do not form a thread")
    return x


def leftmost_base_point(atlas: IntervalAtlas, depth: int | None = None) -> Thread:
    """The thread that takes the leftmost slot of its parent bracket at every level.

    Its image is the least point of the embedded Cantor set.  Below the
    atlas depth the smallest preimage id is used.
    """
    tower = atlas.tower
    depth = tower.height if depth is None else depth
    if not 0 <= depth <= tower.height:
        raise DepthError(f"depth {depth} outside tower of height {tower.height}")
    vertex, idx = tower.levels[0].special, 0
    for m in range(1, depth + 1):
        if m <= atlas.depth:
            lev = atlas.levels[m]
            _, idx = min((lev.slot[i - 1], i) for i in range(1, atlas.s(m) + 1) if lev.parent[i - 1] == idx)
            vertex = atlas.indexing(m).vertex(idx)
        else:
            h = tower.phi(m)
            vertex = min(v for v in tower.levels[m].graph.vertices if h(v) == vertex)
    return thread_of(tower, depth, vertex)


def contraction_depth(atlas: IntervalAtlas) -> int:
    """Least ``d >= 1`` such that every off-crossing quotient bound at levels ``>= d`` is below 1.

    Per-level maxima are exhaustive over sibling pairs within the atlas.
    """
    if not atlas.tower.bd:
        raise UnsupportedOperation("the extension uses backward orbits and needs a bidirectional tower")
    maxima = exhaustive_level_maxima(atlas)
    for d in range(1, atlas.depth + 1):
        if all(v < ONE for k, v in maxima.items() if k >= d):
            return d
    raise CertificationError("no level of the atlas has quotient bounds below 1", inequality="quotient < 1")


@dataclass
class ReturnData:
    level: int
    depth: int  # U_n is the depth-`depth` cylinder of z
    next_depth: int  # depth of U_{n+1}
    sigma: int
    kappa: int
    first_next_hit: int | None  # least i > 0 with T^-i(z) in U_{n+1}, None if past the scan
    far_lower: ExactScalar  # certified lower bound for d(z, T^-sigma z)
    near_upper: ExactScalar  # certified upper bound for d(z, T^-kappa z)
    advances: int = 0
    h: ExactScalar | None = None
    gap_bound: ExactScalar | None = None  # certified lower bound for the eq. min

    @property
    def period(self) -> int:
        return self.kappa - self.sigma

    def to_record(self) -> dict:
        rec = {
            "level": self.level,
            "depth": self.depth,
            "next_depth": self.next_depth,
            "sigma": self.sigma,
            "kappa": self.kappa,
            "period": self.period,
            "first_next_hit": self.first_next_hit,
            "advances": self.advances,
        }
        # h is a power of two; the certified bounds carry megabit numerators,
        # so only their magnitudes are exported
        rec["h"] = None if self.h is None else self.h.to_record()
        for name in ("far_lower", "near_upper", "h", "gap_bound"):
            val = getattr(self, name)
            rec[name + "_log2_approx"] = None if val is None else round(val.log2_abs(), 9)
        return rec


class BackwardOrbit:
    """Lazily extended list ``T^-i(z)``, each entry cut to ``min_depth``.

    Steps are taken from the untruncated thread so no lookdown is lost.
    """

    def __init__(self, z: Thread, min_depth: int) -> None:
        self.min_depth = min_depth
        self._last = z
        self.points = [self._cut(z)]

    def _cut(self, x: Thread) -> Thread:
        return x.truncate(self.min_depth) if x.depth > self.min_depth else x

    def __getitem__(self, i: int) -> Thread:
        pts = self.points
        while len(pts) <= i:
            nxt = backward(self._last)
            if nxt.depth < self.min_depth:
                raise SearchFailure(
                    f"backward orbit eroded below depth {self.min_depth} at step {len(pts)}",
                    level=0,
                    horizon=len(pts),
                    depth=self.min_depth,
                )
            self._last = nxt
            pts.append(self._cut(nxt))
        return pts[i]


def _in_cylinder(x: Thread, z: Thread, depth: int) -> bool:
    return x.prefix[: depth + 1] == z.prefix[: depth + 1]


def _certify_farther(atlas: IntervalAtlas, z: Thread, far: Thread, near: Thread, start: int):
    """Deepen from ``start`` until ``gap(z, far) > span(z, near)``; ``None`` if never."""
    for e in range(start, atlas.depth + 1):
        bz = pi_bracket(atlas, z.truncate(e))
        lo = bz.gap(pi_bracket(atlas, far.truncate(e)))
        hi = bz.span(pi_bracket(atlas, near.truncate(e)))
        if lo > hi:
            return lo, hi
    return None


def find_return_times(
    atlas: IntervalAtlas,
    z: Thread,
    n: int,
    horizon: int,
    *,
    depth: int | None = None,
    orbit: BackwardOrbit | None = None,
) -> ReturnData:
    """Least certified ``(sigma, kappa)`` with ``sigma > 0`` for the level-``n`` cylinder.

    Conditions (i)-(iii) are cylinder-membership tests along the backward
    orbit; (iv) is certified with exact bracket enclosures.  When no pair
    certifies, ``U_n`` moves one level deeper and the search restarts.
    """
    if not atlas.tower.bd:
        raise UnsupportedOperation("return times use backward orbits and need a bidirectional tower")
    d = contraction_depth(atlas) + n - 1 if depth is None else depth
    orbit = orbit or BackwardOrbit(z, atlas.depth)
    advances = 0
    while True:
        nd = d + 1
        if nd > atlas.depth:
            raise SearchFailure(
                f"level {n}: no certified return pair within horizon {horizon} up to depth {d}",
                level=n,
                horizon=horizon,
                depth=d,
            )
        returns, hit = [], None
        for i in range(1, horizon + 1):
            x = orbit[i]
            if _in_cylinder(x, z, nd):
                hit = i
                break
            if _in_cylinder(x, z, d):
                returns.append(i)
        for sigma, kappa in zip(returns, returns[1:]):
            cert = _certify_farther(atlas, z, orbit[sigma], orbit[kappa], nd)
            if cert is not None:
                return ReturnData(n, d, nd, sigma, kappa, hit, cert[0], cert[1], advances)
        d += 1
        advances += 1


def _descendants(atlas: IntervalAtlas, level: int, vertex, target: int) -> list:
    kids = _children(atlas, target)
    layer = [vertex]
    for m in range(level, target):
        layer = [c for v in layer for c in kids[(m, v)]]
    return layer


def _pow2_below(m: ExactScalar) -> ExactScalar:
    """Largest power of two strictly below the positive ``m``."""
    k = m.floor_log2()
    p = ExactScalar.pow2(k)
    return p if p < m else ExactScalar.pow2(k - 1)


def certified_gap(atlas: IntervalAtlas, rd: ReturnData, z: Thread, prev_h: ExactScalar | None) -> ExactScalar:
    """Pick ``h_n`` below the certified minimum of ``d(z,y) - d(Tz,Ty)`` over ``U_n \\ U_{n+1}``.

    ``U_n \\ U_{n+1}`` is covered by the depth-``next_depth`` cylinders of
    ``U_n`` other than ``z``'s.  Each one gets a lower bound from the gap of
    the point brackets minus the span of the image brackets; cylinders whose
    bound is not positive are split one level deeper.  The result is a power
    of two below the minimum, below ``h_{n-1}/2`` and below ``1/2``.
    """
    tower = atlas.tower
    d, nd = rd.depth, rd.next_depth
    subs = [v for v in _descendants(atlas, d, z[d], nd) if v != z[nd]]
    todo = [(nd, v) for v in subs]
    best = None
    kids = _children(atlas, atlas.depth)
    while todo:
        e, v = todo.pop()
        zt = z.truncate(e)
        y = thread_of(tower, e, v)
        diff = pi_bracket(atlas, zt).gap(pi_bracket(atlas, y)) - image_bracket(atlas, zt).span(image_bracket(atlas, y))
        if diff.sign() > 0:
            best = diff if best is None or diff < best else best
        elif e < atlas.depth:
            todo.extend((e + 1, c) for c in kids[(e, v)])
        else:
            raise CertificationError(
                f"level {rd.level}: contraction around z not certified for the depth-{e} cylinder {y.prefix}",
                where=f"level {rd.level}",
                inequality="d(z,y) - d(Tz,Ty) > 0",
            )
    if best is None:
        raise ConstructionError(f"level {rd.level}: U_n minus U_(n+1) is empty")
    cap = HALF if prev_h is None else prev_h.shift(-1)
    h = _pow2_below(best if best < cap else cap)
    rd.gap_bound = best
    rd.h = h
    return h


@dataclass(frozen=True)
class ZPoint:
    """A point of the extension; ``lift`` is its height plus one (0 on the base)."""

    thread: Thread
    lift: ExactScalar
    level: int | None = None  # None on the base
    j: int | None = None

    @property
    def height(self) -> ExactScalar:
        return self.lift - 1

    @property
    def is_base(self) -> bool:
        return self.level is None


@dataclass
class ExtensionSpace:
    atlas: IntervalAtlas
    base: Thread
    d_star: int
    levels: list
    h_tail: ExactScalar  # h_{N+1}, only used for the heights of the last level
    spirals: dict = field(default_factory=dict)  # n -> list[ZPoint]
    orbit: BackwardOrbit | None = field(default=None, repr=False)

    def h(self, n: int) -> ExactScalar:
        return self.levels[n - 1].h if n <= len(self.levels) else self.h_tail

    @property
    def periods(self) -> list[int]:
        return [rd.period for rd in self.levels]

    def base_point(self, x: Thread | None = None) -> ZPoint:
        return ZPoint(x or self.base, exact(0))

    def F(self, p: ZPoint) -> ZPoint:
        if p.is_base:
            return ZPoint(forward(p.thread), p.lift)
        pts = self.spirals[p.level]
        return pts[(p.j + 1) % len(pts)]


def spiral_lift(sigma: int, kappa: int, j: int, h_n: ExactScalar, h_next: ExactScalar) -> ExactScalar:
    """Height plus one of ``z^n_j``: ``(kappa-sigma-1-j) / (2 (kappa-sigma-1)) * (h_n + h_next) + h_n/2``."""
    p = kappa - sigma
    if p < 2:
        raise ConstructionError(f"period {p} leaves the spiral height formula undefined")
    if not 0 <= j < p:
        raise ConstructionError(f"spiral index {j} outside 0..{p - 1}")
    return (h_n + h_next) * Fraction(p - 1 - j, 2 * (p - 1)) + h_n.shift(-1)


def spiral_height(sigma: int, kappa: int, j: int, h_n: ExactScalar, h_next: ExactScalar) -> ExactScalar:
    return spiral_lift(sigma, kappa, j, h_n, h_next) - 1


def build_extension(atlas: IntervalAtlas, n_levels: int, horizon: int, base: Thread | None = None) -> ExtensionSpace:
    """Return data, gaps and spiral points for levels ``1..n_levels``.

    The base point defaults to :func:`leftmost_base_point`.
    """
    tower = atlas.tower
    if not tower.bd:
        raise UnsupportedOperation("the extension uses backward orbits and needs a bidirectional tower")
    if n_levels < 1:
        raise ConstructionError("need at least one spiral level")
    d_star = contraction_depth(atlas)
    z = base if base is not None else leftmost_base_point(atlas)
    if z.depth < atlas.depth:
        raise DepthError(f"base point depth {z.depth} below atlas depth {atlas.depth}")
    orbit = BackwardOrbit(z, atlas.depth)
    levels, d, prev_h = [], d_star, None
    for n in range(1, n_levels + 1):
        rd = find_return_times(atlas, z, n, horizon, depth=d, orbit=orbit)
        prev_h = certified_gap(atlas, rd, z, prev_h)
        levels.append(rd)
        d = rd.next_depth
    ext = ExtensionSpace(atlas, z, d_star, levels, prev_h.shift(-2), orbit=orbit)
    for n, rd in enumerate(levels, start=1):
        h_n, h_next = ext.h(n), ext.h(n + 1)
        ext.spirals[n] = [
            ZPoint(orbit[rd.kappa - 1 - j], spiral_lift(rd.sigma, rd.kappa, j, h_n, h_next), n, j)
            for j in range(rd.period)
        ]
    return ext


# verification


@dataclass
class ExtensionReport:
    samples: int
    counts: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    closing: list = field(default_factory=list)
    periods: list = field(default_factory=list)
    periods_increasing: bool = True

    @property
    def ok(self) -> bool:
        return (
            not self.violations
            and self.periods_increasing
            and all(c.holds for c in self.conditions)
            and all(c.holds for c in self.closing)
        )

    def to_record(self) -> dict:
        return {
            "ok": self.ok,
            "samples": self.samples,
            "counts": dict(sorted(self.counts.items())),
            "skipped": dict(sorted(self.skipped.items())),
            "violations": self.violations,
            "conditions": [c.to_record() for c in self.conditions],
            "closing": [c.to_record() for c in self.closing],
            "periods": self.periods,
            "periods_increasing": self.periods_increasing,
        }


def _d_bounds(atlas: IntervalAtlas, x: Thread, y: Thread) -> tuple[ExactScalar, ExactScalar]:
    bx, by = pi_bracket(atlas, x), pi_bracket(atlas, y)
    return bx.gap(by), bx.span(by)


def _check_conditions(ext: ExtensionSpace) -> list[Certificate]:
    atlas, z, orbit = ext.atlas, ext.base, ext.orbit
    out = []
    prev = None
    for rd in ext.levels:
        n, d, nd = rd.level, rd.depth, rd.next_depth
        out.append(Certificate(n, "0 < sigma < kappa", 0 < rd.sigma < rd.kappa))
        members = [i for i in range(rd.sigma + 1, rd.kappa) if _in_cylinder(orbit[i], z, d)]
        out.append(Certificate(n, "(i) no return strictly between", not members, str(members[:5])))
        both = _in_cylinder(orbit[rd.sigma], z, d) and _in_cylinder(orbit[rd.kappa], z, d)
        out.append(Certificate(n, "(ii) both times return", both))
        early = [i for i in range(1, rd.kappa + 1) if _in_cylinder(orbit[i], z, nd)]
        out.append(Certificate(n, "(iii) no deeper return up to kappa", not early, str(early[:5])))
        zt = z.truncate(atlas.depth)
        far_lo, _ = _d_bounds(atlas, zt, orbit[rd.sigma])
        _, near_hi = _d_bounds(atlas, zt, orbit[rd.kappa])
        out.append(Certificate(n, "(iv) d(z,T^-sigma z) > d(z,T^-kappa z)", far_lo > near_hi))
        out.append(Certificate(n, "0 < h_n < certified min", 0 < rd.h.sign() and rd.h < rd.gap_bound))
        cap = HALF if prev is None else prev.h.shift(-1)
        out.append(Certificate(n, "h_1 < 1/2 and h_(n+1) < h_n/2", rd.h < cap))
        pts = ext.spirals[n]
        lifts = [p.lift for p in pts]
        dec = all(a > b for a, b in zip(lifts, lifts[1:]))
        out.append(Certificate(n, "spiral heights strictly decrease", dec))
        lo, hi = rd.h.shift(-1), rd.h + ext.h(n + 1).shift(-1)
        band = all(lo <= q <= hi for q in lifts) and lifts[-1] == lo and lifts[0] == hi
        out.append(Certificate(n, "spiral heights in band above -1", band and lo.sign() > 0))
        p = pts[0]
        for _ in range(rd.period):
            p = ext.F(p)
        out.append(Certificate(n, "F^period fixes z^n_0", p is pts[0]))
        prev = rd
    return out


def closing_chain(ext: ExtensionSpace, n: int) -> list[Certificate]:
    """Both strict links of the spiral-to-base inequality chain at level ``n``.

    ``rho(F(z,-1), F(z^n_last))`` is bounded above with the span of the image
    point brackets, compared with a lower bound of ``d(z, T^-kappa z) +
    h_{n+1}/2``, whose upper bound is in turn compared with a lower bound of
    ``rho((z,-1), z^n_last)``.
    """
    atlas, orbit = ext.atlas, ext.orbit
    rd = ext.levels[n - 1]
    h_n, h_next = ext.h(n), ext.h(n + 1)
    zt = ext.base.truncate(atlas.depth)
    tz = forward(ext.base).truncate(atlas.depth)
    last = ext.spirals[n][-1]
    first = ext.F(last)
    ok_struct = first is ext.spirals[n][0] and first.thread == orbit[rd.kappa - 1]
    _, img_hi = _d_bounds(atlas, tz, first.thread)
    lhs_hi = img_hi + first.lift
    k_lo, k_hi = _d_bounds(atlas, zt, orbit[rd.kappa])
    s_lo, _ = _d_bounds(atlas, zt, last.thread)
    rhs_lo = s_lo + last.lift
    link1 = lhs_hi < k_lo + h_next.shift(-1)
    link2 = k_hi + h_next.shift(-1) < rhs_lo
    return [
        Certificate(n, "F(z^n_last) = z^n_0 over T^(1-kappa) z", ok_struct),
        Certificate(n, "rho(F(z,-1), z^n_0) < d(z, T^-kappa z) + h_(n+1)/2", link1),
        Certificate(n, "d(z, T^-kappa z) + h_(n+1)/2 < rho((z,-1), z^n_last)", link2),
    ]


def _rho_bounds(atlas: IntervalAtlas, p: ZPoint, q: ZPoint) -> tuple[ExactScalar, ExactScalar]:
    lo, hi = _d_bounds(atlas, p.thread.truncate(atlas.depth), q.thread.truncate(atlas.depth))
    dh = abs(p.lift - q.lift)
    return lo + dh, hi + dh


def verify_extension(ext: ExtensionSpace, samples: int, seed: int) -> ExtensionReport:
    """Recheck the construction and certify rho-contraction on sampled pairs.

    Pair kinds: two base points disagreeing at or beyond the contraction
    floor off a W-crossing; the base point ``z`` with a non-final spiral
    point over ``U_1``; and two non-final spiral points of one level whose
    bases form such a base pair.  Pairs outside these regimes are counted in
    ``skipped``.
    """
    atlas = ext.atlas
    report = ExtensionReport(samples, periods=ext.periods)
    report.periods_increasing = all(a < b for a, b in zip(ext.periods, ext.periods[1:]))
    report.conditions = _check_conditions(ext)
    for n in range(1, len(ext.levels) + 1):
        report.closing.extend(closing_chain(ext, n))

    floor = contraction_floor(atlas)
    depth = atlas.depth
    draw = pair_sampler(atlas, depth, floor) if floor is not None else None
    rng = random.Random(seed)
    z = ext.base_point(ext.base.truncate(depth))
    u1 = ext.levels[0].depth
    kinds = ["base-base", "base-spiral", "spiral-spiral"]
    # non-final spiral points lying over U_1
    eligible = {
        n: [p.j for p in pts[:-1] if _in_cylinder(p.thread, ext.base, u1)] for n, pts in ext.spirals.items()
    }

    def in_regime(x: Thread, y: Thread) -> bool:
        k = first_disagreement(x, y)
        return k is not None and floor is not None and floor <= k <= depth and not is_crossing(atlas, x, y)

    def skip(kind: str, why: str) -> None:
        key = f"{kind}: {why}"
        report.skipped[key] = report.skipped.get(key, 0) + 1

    for _ in range(samples):
        kind = rng.choice(kinds)
        report.counts[kind] = report.counts.get(kind, 0) + 1
        if kind == "base-base":
            if draw is None:
                skip(kind, "no contracting level")
                continue
            x, y = draw(rng)
            if is_crossing(atlas, x, y):
                skip(kind, "W-crossing")
                continue
            p, q = ext.base_point(x), ext.base_point(y)
            bx, by = image_bracket(atlas, x), image_bracket(atlas, y)
            img_hi = bx.span(by)
            lo, _ = _rho_bounds(atlas, p, q)
            if not img_hi < lo:
                report.violations.append({"kind": kind, "x": list(x.prefix), "y": list(y.prefix)})
            continue
        n = rng.randint(1, len(ext.levels))
        pts = ext.spirals[n]
        if kind == "base-spiral":
            if not eligible[n]:
                skip(kind, "no spiral base inside U_1")
                continue
            j = rng.choice(eligible[n])
            sp = pts[j]
            p, q = z, sp
        else:
            j = rng.randrange(len(pts) - 1)
            sp = pts[j]
            j2 = rng.randrange(len(pts) - 1)
            if j2 == j:
                skip(kind, "same point")
                continue
            q = pts[j2]
            if not in_regime(sp.thread.truncate(depth), q.thread.truncate(depth)):
                skip(kind, "bases outside the contraction regime")
                continue
            p = sp
        fp, fq = ext.F(p), ext.F(q)
        if p.is_base:
            fp = ZPoint(forward(ext.base).truncate(depth), fp.lift)
        _, img_hi = _rho_bounds(atlas, fp, fq)
        lo, _ = _rho_bounds(atlas, p, q)
        if not img_hi < lo:
            report.violations.append(
                {"kind": kind, "level": n, "j": j, "x": list(p.thread.prefix), "y": list(q.thread.prefix)}
            )
    return report


def extension_to_json(ext: ExtensionSpace) -> dict:
    return {
        "base_point": list(ext.base.prefix),
        "contraction_depth": ext.d_star,
        "atlas_depth": ext.atlas.depth,
        "levels": [rd.to_record() for rd in ext.levels],
        "h_tail": ext.h_tail.to_record(),
        "periods": ext.periods,
        "spirals": {
            str(n): [{"j": p.j, "thread": list(p.thread.prefix), "lift": p.lift.to_record()} for p in pts]
            for n, pts in sorted(ext.spirals.items())
        },
    }
