from __future__ import annotations

from fractions import Fraction

import pytest

from gmcantor.dynamics import enumerate_threads, successor, thread_of
from gmcantor.embedding import (
    A0,
    CHECKED,
    STRICT,
    atlas_from_json,
    atlas_summary,
    atlas_to_json,
    bracket_bound_check,
    dumps_atlas,
    f_bracket,
    hermite_zero_slopes,
    image_bracket,
    index_vertices,
    indexing_violations,
    jarnik_extend,
    pi_bracket,
    psi,
    special_return_vertices,
    build_atlas,
)
from gmcantor.errors import CertificationError, DepthError, DomainError
from gmcantor.exact import ExactScalar, Interval, exact
from gmcantor.gmtower import CoverTower, build_tower_from_words, odometer_tower, random_simple_tower


def oracle_atlas(tower: CoverTower, depth: int, atlas) -> dict:
    """Endpoints of every A and D rebuilt with Fractions from the defining formulas.

    Reuses only the atlas's vertex order and slot assignment.
    """
    out: dict = {}
    a_prev = Fraction(1, 6)
    for m in range(1, depth + 1):
        s_m, s_next = tower.s(m), tower.s(m + 1)
        lev = atlas.levels[m]
        diam_a = {}
        for i in range(1, s_m + 1):
            if m == 1:
                lo, da = Fraction(i), Fraction(1, 2)
            else:
                plo, phi = out[("D", m - 1, lev.parent[i - 1])]
                da = (phi - plo) / s_m
                lo = plo + da * lev.slot[i - 1]
            dd = a_prev / 2 ** (2 * s_next * s_next + i * s_next)
            dlo = lo + (da - dd) / 2
            out[("A", m, i)] = (lo, lo + da)
            out[("D", m, i)] = (dlo, dlo + dd)
            diam_a[i] = da
        a_prev = max(diam_a.values()) / 3
        out[("a", m)] = a_prev
    return out


def as_pair(iv: Interval) -> tuple[Fraction, Fraction]:
    return iv.lo.to_fraction(), iv.hi.to_fraction()


class TestPsi:
    def test_first_value_on_29(self) -> None:
        t = odometer_tower([2, 9])
        assert psi(t, 1, 1, A0).to_fraction() == Fraction(1, 6 * 2**666)

    @pytest.mark.parametrize("bases", [[2, 9], [2, 9, 73], [3, 2, 2]])
    def test_ratio_per_step(self, bases: list[int]) -> None:
        t = odometer_tower(bases)
        for m in range(1, t.height):
            s_next = t.s(m + 1)
            a = ExactScalar(1, 5)
            for i in range(1, min(t.s(m), 40)):
                ratio = psi(t, m, i + 1, a) / psi(t, m, i, a)
                assert ratio.to_fraction() == Fraction(1, 2**s_next)

    def test_needs_next_level(self) -> None:
        with pytest.raises(DepthError):
            psi(odometer_tower([2, 9]), 2, 1, A0)


class TestIndexing:
    @pytest.mark.parametrize(
        "tower",
        [odometer_tower([2, 9, 3]), random_simple_tower(4, 3, [2, 3, 2], 6)],
        ids=["odometer", "random"],
    )
    def test_contract(self, tower: CoverTower) -> None:
        for m in range(1, tower.height + 1):
            ix = index_vertices(tower, m)
            assert indexing_violations(tower, ix) == []
            assert sorted(ix.order) == sorted(tower.levels[m].graph.vertices)
            # W vertices come first
            k = len(ix.W)
            assert set(ix.order[:k]) == set(ix.W)

    def test_odometer_W(self) -> None:
        t = odometer_tower([2, 9])
        w_prime, w = special_return_vertices(t, 2)
        c = t.levels[2].cycles[0]
        assert w_prime == w == frozenset({c[2]})

    def test_out_of_range(self) -> None:
        with pytest.raises(DepthError):
            special_return_vertices(odometer_tower([2]), 2)


class TestAtlasExact:
    @pytest.mark.parametrize(
        "bases,depth,mode", [([2, 9, 73], 2, STRICT), ([2, 3, 2], 2, CHECKED), ([3, 2, 2, 2], 3, CHECKED)]
    )
    def test_matches_fraction_oracle(self, bases: list[int], depth: int, mode: str) -> None:
        t = odometer_tower(bases)
        atlas = build_atlas(t, depth, mode)
        oracle = oracle_atlas(t, depth, atlas)
        for m in range(1, depth + 1):
            assert atlas.a[m].to_fraction() == oracle[("a", m)]
            # spot-check a spread of indices on wide levels
            step = max(1, t.s(m) // 25)
            for i in list(range(1, t.s(m) + 1, step)) + [t.s(m)]:
                assert as_pair(atlas.A(m, i)) == oracle[("A", m, i)]
                assert as_pair(atlas.D(m, i)) == oracle[("D", m, i)]

    def test_level_one_intervals(self) -> None:
        atlas = build_atlas(odometer_tower([2, 9]), 1)
        for i in (1, 2):
            assert as_pair(atlas.A(1, i)) == (Fraction(i), Fraction(i) + Fraction(1, 2))
        assert as_pair(atlas.level0_bracket()) == (Fraction(1), Fraction(5, 2))

    def test_random_tower_nesting(self) -> None:
        t = random_simple_tower(6, 3, [2, 2, 2], 5)
        atlas = build_atlas(t, 2, CHECKED)
        for m in (1, 2):
            for i in range(1, t.s(m) + 1):
                a, d = atlas.A(m, i), atlas.D(m, i)
                assert a.strictly_contains_interval(d)
                if m > 1:
                    parent = atlas.D(m - 1, atlas.levels[m].parent[i - 1])
                    assert parent.contains_interval(a)

    def test_bracket_bounds(self, atlas2973) -> None:
        certs = bracket_bound_check(atlas2973)
        assert len(certs) == 4 and all(c.holds for c in certs)


class TestAtlasErrors:
    def test_strict_needs_growth(self) -> None:
        with pytest.raises(CertificationError) as exc:
            build_atlas(odometer_tower([2, 2, 2]), 2, STRICT)
        assert exc.value.inequality == "growth"

    def test_checked_drops_growth(self) -> None:
        atlas = build_atlas(odometer_tower([2, 2, 2]), 2, CHECKED)
        assert atlas.mode == CHECKED

    def test_depth_limits(self) -> None:
        with pytest.raises(DepthError):
            build_atlas(odometer_tower([2, 9]), 2)
        with pytest.raises(DepthError):
            build_atlas(odometer_tower([2, 9]), 0)
        with pytest.raises(DomainError):
            build_atlas(odometer_tower([2, 9]), 1, "loose")

    def test_index_range(self, atlas29) -> None:
        with pytest.raises(DomainError):
            atlas29.A(1, 3)
        with pytest.raises(DepthError):
            atlas29.D(2, 1)

    def test_hole_size_certificates(self, atlas2973) -> None:
        names = {(c.level, c.name): c.holds for c in atlas2973.certificates}
        assert names[(2, "hole-size: diam A > 3 * 2^(-2 s_(m+2)) a_m")]
        assert names[(2, "hole-size: psi < 2^(-2 s_(m+2)) a_m")]
        # a_0 = 1/6 is smaller than 3 a_1 = 1/2, so this link is reported as failing
        assert names[(2, "hole-size link: a_(m-1) >= 3 a_m")] is False


class TestPointsAndShift:
    def test_pi_nests_with_depth(self, atlas2973) -> None:
        t = atlas2973.tower
        for x in enumerate_threads(t, 2)[::37]:
            assert pi_bracket(atlas2973, x.truncate(1)).contains_interval(pi_bracket(atlas2973, x))

    def test_f_bracket_is_shifted_cylinder(self, atlas2973) -> None:
        t = atlas2973.tower
        for x in enumerate_threads(t, 3)[::101]:
            assert f_bracket(atlas2973, x) == pi_bracket(atlas2973, successor(x))
            # the image of the depth-2 cylinder sits inside the non-eroded image bracket
            assert image_bracket(atlas2973, x.truncate(2)).contains_interval(f_bracket(atlas2973, x))

    def test_pi_too_deep(self, atlas29) -> None:
        with pytest.raises(DepthError):
            pi_bracket(atlas29, thread_of(atlas29.tower, 2, 0))


class TestGapCubics:
    def test_hermite_oracle(self) -> None:
        gap = Interval(exact(Fraction(1, 3)), exact(Fraction(5, 4)))
        y0, y1 = exact(Fraction(2, 7)), exact(Fraction(-3, 5))
        p = hermite_zero_slopes(gap, y0, y1)
        assert p.value(gap.lo) == y0 and p.value(gap.hi) == y1
        assert p.derivative(gap.lo).is_zero() and p.derivative(gap.hi).is_zero()
        mid = gap.midpoint
        assert p.value(mid) == (y0 + y1) / 2
        assert abs(p.derivative(mid)) == p.max_slope()
        # sampled slopes never exceed the midpoint slope
        for k in range(1, 20):
            t = gap.lo + gap.length * Fraction(k, 20)
            assert abs(p.derivative(t)) <= p.max_slope()

    def test_jarnik_endpoints(self, atlas29) -> None:
        cubics = jarnik_extend(atlas29, 1)
        assert len(cubics) == 1
        p = cubics[0]
        x1, x2 = (thread_of(atlas29.tower, 1, v) for v in atlas29.indexing(1).order)
        left, right = sorted([x1, x2], key=lambda x: pi_bracket(atlas29, x).lo)
        assert p.gap == Interval(pi_bracket(atlas29, left).hi, pi_bracket(atlas29, right).lo)
        assert p.value(p.gap.lo) == f_bracket(atlas29, left).midpoint
        assert p.value(p.gap.hi) == f_bracket(atlas29, right).midpoint
        assert p.coeffs[1].is_zero()


class TestJson:
    def test_roundtrip_materialized(self) -> None:
        atlas = build_atlas(odometer_tower([2, 3, 2]), 2, CHECKED)
        data = atlas_to_json(atlas, materialize=True)
        again = atlas_from_json(data)
        assert dumps_atlas(again, materialize=True) == dumps_atlas(atlas, materialize=True)

    def test_tampered_layout_rejected(self) -> None:
        atlas = build_atlas(odometer_tower([2, 3, 2]), 2, CHECKED)
        data = atlas_to_json(atlas)
        data["levels"][1]["vertices"][0]["slot_path"] = [9, 9]
        with pytest.raises(DomainError):
            atlas_from_json(data)

    def test_summary_is_plain(self, atlas2973) -> None:
        s = atlas_summary(atlas2973)
        assert s["vertex_counts"] == [1, 2, 18, 1314]
        row = s["levels"][1]["rows"][0]
        assert row["diam_D_pow2"] == atlas2973.diam_D(2, 1).e


def test_multi_cycle_tower_atlas() -> None:
    t = build_tower_from_words([[[1, 1], [1, 1, 1]], [[1, 2], [1, 1, 2]], [[1, 2, 2]]])
    atlas = build_atlas(t, 2, CHECKED)
    for x in enumerate_threads(t, 2):
        assert pi_bracket(atlas, x.truncate(1)).contains_interval(pi_bracket(atlas, x))
