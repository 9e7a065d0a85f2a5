import random
from fractions import Fraction as F

import pytest

from foamlab.descriptors import (CountableUnion, Exact, MeasureZero, Tag, degenerate_cover, family_union,
                                 has_dense_complement, is_residual_in)
from foamlab.parser import parse_region
from foamlab.region import Box, RegionSet, box_volume_sum, volume

UNIT = Box((F(0),), (F(1),))
UNIT2 = Box((F(0), F(0)), (F(1), F(1)))
SQUARE = Box((F(-1), F(-1)), (F(1), F(1)))


def R(text, omega=SQUARE):
    return parse_region(text, omega)


class TestTopology:
    def test_interior_of_hyperplane_is_empty(self):
        assert R("x1 = 0", UNIT2).interior().is_empty()

    def test_complement_of_empty_is_omega(self):
        assert RegionSet.empty(UNIT).complement().same_points(RegionSet.full(UNIT))

    def test_closure_is_relative_to_omega(self):
        cl = R("0 < x1 < 1/2", UNIT).closure()
        assert cl.same_points(R("x1 <= 1/2", UNIT))
        # membership against the definition at sampled points
        for x in (F(0), F(1, 2), F(1, 4), F(3, 4)):
            if UNIT.contains((x,)):
                assert cl.contains_point((x,)) == (x <= F(1, 2))

    def test_boundary_of_open_disk_like_square(self):
        A = R("-1/2 < x1 < 1/2 & -1/2 < x2 < 1/2")
        assert A.is_open()
        assert not A.is_closed()
        assert A.boundary().is_nowhere_dense()
        assert A.boundary().contains_point((F(1, 2), F(0)))
        assert not A.boundary().contains_point((F(0), F(0)))

    @pytest.mark.parametrize("text,expected", [
        ("x1 = 1/2", True),
        ("x1 = x2 | x1 = -x2", True),
        ("1/4 <= x1 <= 1/2", False),
        ("x1 = 0 | 0 < x2 < 1/8", False),
    ])
    def test_nowhere_dense(self, text, expected):
        assert R(text).is_nowhere_dense() is expected

    def test_nowhere_dense_one_dimensional_interval(self):
        assert not R("1/4 <= x1 <= 1/2", UNIT).is_nowhere_dense()

    def test_finite_point_sets_are_nowhere_dense(self):
        rng = random.Random(3)
        pts = RegionSet.empty(SQUARE)
        for _ in range(50):
            pts = pts.union(RegionSet.point(SQUARE, (F(rng.randint(-99, 99), 100), F(rng.randint(-99, 99), 100))))
        assert pts.is_nowhere_dense()

    def test_inflate_and_distance(self):
        line = R("x1 = 0")
        band = line.inflate(F(1, 4))
        assert band.contains_point((F(1, 4), F(1, 2)))
        assert not band.contains_point((F(1, 3), F(0)))
        assert line.linf_distance((F(1, 3), F(0))) == F(1, 3)

    def test_interior_box_lies_inside(self):
        A = R("x1 + x2 < 1/2 & x1 > 0 & x2 > 0")
        box = A.interior_box()
        assert box is not None and box.subset_of(A)


class TestVolume:
    def test_square(self):
        assert volume(RegionSet.box(UNIT2, (0, 0), (F(1, 2), F(1, 2)))) == F(1, 4)

    def test_overlap_counts_once(self):
        r = RegionSet.box(UNIT, (0,), (F(1, 2),)).union(RegionSet.box(UNIT, (F(1, 4),), (F(3, 4),)))
        assert volume(r) == F(3, 4)

    def test_degenerate_box_has_zero_volume(self):
        assert volume(RegionSet.box(UNIT2, (F(1, 2), 0), (F(1, 2), 1))) == 0

    def test_tilted_full_cell_is_refused(self):
        with pytest.raises(ValueError):
            volume(R("x1 + x2 < 0"))


class TestDescriptors:
    def test_rationals_have_dense_complement(self):
        q = CountableUnion(UNIT, "rationals")
        for depth in (1, 8, 64):
            v = has_dense_complement(q, depth)
            assert v.kind == "Confirmed" and v.depth == depth

    def test_full_box_is_refuted(self):
        v = has_dense_complement(Exact(R("1/4 <= x1 <= 1/2", UNIT)))
        assert v.kind == "Refuted" and "box" in v.witness

    def test_empty_is_confirmed(self):
        assert has_dense_complement(Exact(RegionSet.empty(UNIT))).kind == "Confirmed"

    def test_union_of_hyperplanes_stays_closed_nowhere_dense(self):
        u = family_union(Exact(R("x1 = 0")), Exact(R("x2 = 1/3")))
        assert isinstance(u, Exact) and u.tag is Tag.CLOSED_NOWHERE_DENSE

    def test_interleave_enumeration(self):
        q = CountableUnion(UNIT, "rationals")
        d = CountableUnion(UNIT, "dyadics")
        u = family_union(q, d)
        assert u.tag is Tag.FIRST_CATEGORY
        assert [u.stage(i).text() for i in range(1, 7)] == [
            q.stage(1).text(), d.stage(1).text(), q.stage(2).text(), d.stage(2).text(),
            q.stage(3).text(), d.stage(3).text()]

    def test_rational_enumeration_order(self):
        q = CountableUnion(UNIT, "rationals")
        pts = [q.stage(i).sample() for i in range(1, 6)]
        assert pts == [(F(1, 2),), (F(1, 3),), (F(2, 3),), (F(1, 4),), (F(3, 4),)]

    def test_measure_zero_cover_volumes(self):
        mz = MeasureZero((Exact(R("x1 = 1/3")), CountableUnion(SQUARE, "rationals")))
        for eps in (F(1), F(1, 8), F(1, 64)):
            cover = mz.cover(eps, depth=16)
            assert box_volume_sum(cover) <= eps
            assert mz.truncate(16).subset_of(cover)
        assert mz.validate(depth=16, levels=6)

    def test_degenerate_cover_of_tilted_line(self):
        line = R("x1 = x2")
        cover = degenerate_cover(line, F(1, 16))
        assert box_volume_sum(cover) <= F(1, 16)
        rng = random.Random(1)
        for _ in range(30):
            x = line.sample(rng)
            assert cover.contains_point(x)

    def test_general_descriptors_have_no_union(self):
        with pytest.raises(ValueError):
            family_union(Exact(R("x1 < 0")), Exact(R("x1 = 0")))


class TestResidual:
    def test_first_category_is_never_residual(self):
        q = CountableUnion(UNIT, "rationals")
        v = is_residual_in(q, R("1/3 < x1 < 1/2", UNIT))
        assert v.kind == "NotResidual"

    def test_open_set_is_residual_in_itself(self):
        U = R("1/4 < x1 < 1/2", UNIT)
        assert is_residual_in(Exact(U), U).kind == "ResidualWitness"

    def test_hyperplane_is_not_residual(self):
        v = is_residual_in(Exact(R("x1 = 0")), R("-1/2 < x1 < 1/2 & 0 < x2 < 1/2"))
        assert v.kind == "NotResidual"

    def test_requires_open_nonempty_set(self):
        with pytest.raises(ValueError):
            is_residual_in(Exact(R("x1 = 0")), R("x1 <= 0"))
