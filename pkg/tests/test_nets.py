import random
from fractions import Fraction as F

import pytest

from corpus import CORPUS, OMEGA1, delta_1d, diag, heaviside_defect, zero_net
from foamlab import expr as E
from foamlab.nets import (CofinalMapped, IndexSetMismatch, Naturals, PiecewiseError, ProductNN,
                          check_gluing, is_countably_cofinal, net_add, net_diff, net_from_text, net_mul,
                          net_neg, upper_bound)
from foamlab.parser import parse_region
from foamlab.region import Box


class TestIndexSets:
    def test_naturals_chain(self):
        assert is_countably_cofinal(Naturals()).kind == "Confirmed"
        assert [Naturals().label(i) for i in (1, 2, 3)] == [1, 2, 3]

    def test_product_chain_and_upper_bounds(self):
        P = ProductNN()
        assert P.label(5) == (5, 5)
        for a in range(1, 5):
            for b in range(1, 5):
                ub = upper_bound(P, (a, b), (b, a))
                assert ub == (max(a, b), max(a, b))

    def test_non_monotone_chain_is_refuted(self):
        v = is_countably_cofinal(CofinalMapped(chain=(1, 4, 3)))
        assert v.kind == "Refuted" and v.witness["position"] == 3

    def test_rule_chain(self):
        c = CofinalMapped(rule="2^i")
        assert [c.label(i) for i in range(1, 5)] == [2, 4, 8, 16]
        assert is_countably_cofinal(c).kind == "Confirmed"

    def test_list_chain_continues_arithmetically(self):
        c = CofinalMapped(chain=(1, 3, 5))
        assert c.label(6) == 11


class TestOperations:
    def test_multiplying_by_zero_gives_literal_zero(self):
        u = delta_1d()
        z = net_mul(u, zero_net())
        assert all(z.at(i).is_literal_zero() for i in range(1, 9))

    def test_adding_negative_gives_literal_zero(self):
        u = heaviside_defect(2)
        w = net_add(u, net_neg(u))
        assert all(w.at(i).is_literal_zero() for i in range(1, 33))

    def test_zero_region_of_product_contains_both(self):
        rng = random.Random(0)
        one_d = [c for c in CORPUS if c.net().omega == OMEGA1 and c.net().index_set == Naturals()]
        for _ in range(20):
            a, b = rng.sample(one_d, 2)
            u, v = a.net(), b.net()
            k = rng.randint(1, 16)
            prod = net_mul(u, v)
            assert u.zero_region(k).union(v.zero_region(k)).subset_of(prod.zero_region(k))

    def test_derivative_of_zero_net(self):
        assert net_diff(zero_net(), (3,)).at(4).is_literal_zero()

    def test_derivative_keeps_interior_zeros(self):
        for case in CORPUS:
            u = case.net()
            p = tuple([1] + [0] * (u.omega.n - 1))
            for k in (2, 8):
                assert u.zero_region(k).interior().subset_of(net_diff(u, p).zero_region(k))

    def test_diagonal_derivative(self):
        psi = diag(OMEGA1, Naturals(), "sin(x1)*exp(x1)")
        d = net_diff(psi, (2,))
        assert d.diagonal == psi.diagonal.diff((2,))
        assert d.at(7) == psi.diagonal.diff((2,))

    def test_mixing_index_sets_is_an_error(self):
        a = diag(OMEGA1, Naturals(), "x1")
        b = diag(OMEGA1, CofinalMapped(rule="2^i"), "x1")
        with pytest.raises(IndexSetMismatch):
            net_add(a, b)


class TestZeroRegions:
    def test_delta_zero_region(self):
        u = delta_1d()
        for k in (1, 4, 16):
            expected = parse_region(f"x1 <= -1/{k} | x1 >= 1/{k}", OMEGA1)
            assert u.zero_region(k).same_points(expected)
        # value check by sampling inside and outside the support
        assert u.at(8).evaluate([F(1, 8)]) == 0.0
        assert u.at(8).evaluate([F(1, 16)]) > 0

    def test_diagonal_of_nonzero_function_has_no_zero_region(self):
        assert diag(OMEGA1, Naturals(), "2 + sin(x1)").zero_region(5).is_empty()

    def test_heaviside_defect_zero_region(self):
        u = heaviside_defect(2)
        for k in (2, 8, 32):
            assert parse_region(f"x1 <= -1/{k} | x1 >= 1/{k}", OMEGA1).subset_of(u.zero_region(k))

    def test_monotone_declaration_is_checked(self):
        bad = net_from_text(OMEGA1, Naturals(), [("x1 < 1/k", "0")], default="x1 - 1/k", monotone_zero=True)
        with pytest.raises(PiecewiseError, match="monotone"):
            bad.validate(8)


class TestPieces:
    def test_overlapping_pieces_are_rejected(self):
        with pytest.raises(PiecewiseError, match="overlap"):
            net_from_text(OMEGA1, Naturals(), [("x1 < 1/2", "0"), ("x1 > 0", "1")]).at(1)

    def test_uncovered_domain_without_default(self):
        with pytest.raises(PiecewiseError, match="cover"):
            net_from_text(OMEGA1, Naturals(), [("x1 < 0", "0")], default=None).at(1)

    def test_gluing_detects_a_jump(self):
        pieces = [(parse_region("x1 < 0", OMEGA1), E.ZERO), (parse_region("x1 >= 0", OMEGA1), E.var(0) + E.ONE)]
        with pytest.raises(PiecewiseError, match="glue"):
            check_gluing(OMEGA1, pieces, random.Random(0))

    def test_gluing_accepts_smooth_plateau_junction(self):
        u = net_from_text(OMEGA1, Naturals(), [("x1 <= -1/k", "0"), ("-1/k < x1 < 1/k", "sstep(k*x1)"),
                                               ("x1 >= 1/k", "1")])
        u.validate(16)

    def test_normal_form_splits_at_plateaus(self):
        u = net_from_text(OMEGA1, Naturals(), [], default="sstep(4*x1)")
        pw = u.at(1)
        assert pw.piece_at([F(1, 2)]) == E.ONE
        assert pw.piece_at([F(-1, 2)]) == E.ZERO

    def test_two_dimensional_product_index(self):
        omega = Box((F(-1), F(-1)), (F(1), F(1)))
        u = net_from_text(omega, ProductNN(), [("-1/k1 < x1 < 1/k1", "k2*x2*bump(k1*x1)")])
        assert u.at(3).evaluate([F(0), F(1, 2)]) == pytest.approx(1.5 * 0.36787944117144233)
