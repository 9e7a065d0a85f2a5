import random
from fractions import Fraction as F

import pytest

from corpus import OMEGA1, SPACETIME
from foamlab import expr as E
from foamlab.algebra import (AlgebraContext, ContextMismatch, DiffOperator, apply_operator, delta_integral,
                             elem_diff, elem_scale, embed_smooth, eq, is_generalized_solution, mollifier_net,
                             nd_to_bi_hom, one, shock_net, zero)
from foamlab.certs import BAIRE_I, M0, ND
from foamlab.nets import CofinalMapped, Naturals
from foamlab.parser import parse_expr, parse_region

CTX = AlgebraContext(OMEGA1, Naturals(), ND)
SMOOTH = ["0", "1", "x1", "x1^2 - 1/3", "sin(x1)", "exp(x1)*cos(x1)", "bump(x1)", "nbump(2*x1)",
          "sstep(x1)", "x1^3 + 2*x1"]


def H():
    return mollifier_net("heaviside", CTX)


def delta():
    return mollifier_net("delta", CTX)


def smooth(text, ctx=CTX):
    return embed_smooth(parse_expr(text, ctx.omega.n), ctx, text)


class TestEquality:
    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_heaviside_powers(self, m):
        p = H()
        for _ in range(m - 1):
            p = p * H()
        v = eq(p, H())
        assert v.kind == "Equal"
        assert v.witness["sigma"].same_points(parse_region("x1 = 0", OMEGA1))

    def test_delta_is_zero(self):
        assert eq(delta(), zero(CTX)).kind == "Equal"

    def test_delta_squared_is_zero(self):
        assert eq(delta() * delta(), zero(CTX)).kind == "Equal"

    def test_bump_is_not_zero(self):
        v = eq(smooth("bump(x1)"), zero(CTX))
        assert v.kind == "NotEqual" and v.witness["x"] == [F(0)]

    def test_heaviside_is_not_zero(self):
        v = eq(H(), zero(CTX))
        assert v.kind == "NotEqual" and v.witness["x"][0] > 0

    def test_identity_minus_identity(self):
        x = smooth("x1")
        assert eq(x - x, zero(CTX)).kind == "Equal"

    def test_context_mismatch(self):
        other = AlgebraContext(OMEGA1, CofinalMapped(rule="2^i"), ND)
        with pytest.raises(ContextMismatch):
            eq(H(), mollifier_net("heaviside", other))
        with pytest.raises(ContextMismatch):
            H() + mollifier_net("heaviside", CTX.with_family(BAIRE_I))


class TestMollifiers:
    @pytest.mark.parametrize("k", [1, 2, 8, 64, 1024])
    def test_delta_integrates_to_one(self, k):
        assert delta_integral(k) == pytest.approx(1.0, abs=1e-6)

    def test_heaviside_plateaus(self):
        for k in (2, 4, 16):
            h = H().rep.at(k)
            assert h.evaluate([F(1, k)]) == 1.0
            assert h.evaluate([F(-1, k)]) == 0.0
            assert h.evaluate([F(0)]) == pytest.approx(0.5)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            mollifier_net("gaussian", CTX)


class TestEmbedding:
    def test_additive_and_multiplicative(self):
        rng = random.Random(0)
        for _ in range(10):
            a, b = rng.sample(SMOOTH, 2)
            lhs = smooth(a) * smooth(b)
            rhs = smooth(f"({a})*({b})")
            assert lhs.rep.at(3) == rhs.rep.at(3)
            assert (smooth(a) + smooth(b)).rep.at(5) == smooth(f"({a})+({b})").rep.at(5)

    def test_one_maps_to_one(self):
        assert smooth("1").rep.at(2) == one(CTX).rep.at(2)

    @pytest.mark.parametrize("text", SMOOTH)
    def test_derivative_diagram_commutes(self, text):
        psi = parse_expr(text)
        for p in [(1,), (2,), (3,)]:
            left = elem_diff(embed_smooth(psi, CTX), p)
            right = embed_smooth(E.diff(psi, p), CTX)
            assert left.rep.at(7) == right.rep.at(7)

    def test_injective_on_distinct_functions(self):
        rng = random.Random(1)
        for _ in range(20):
            a, b = rng.sample(SMOOTH, 2)
            assert eq(smooth(a), smooth(b), depth=16).kind == "NotEqual"


class TestFamilies:
    def test_nd_to_first_category_keeps_zero(self):
        assert eq(nd_to_bi_hom(zero(CTX)), zero(CTX.with_family(BAIRE_I))).kind == "Equal"

    def test_nd_to_first_category_keeps_heaviside_defect(self):
        d = nd_to_bi_hom(H() * H() - H())
        assert eq(d, zero(d.ctx)).kind == "Equal"

    def test_map_respects_products(self):
        rng = random.Random(2)
        elems = [H(), delta(), smooth("x1"), smooth("sin(x1)"), H() * H() - H()]
        for _ in range(10):
            a, b = rng.choice(elems), rng.choice(elems)
            prod_then_map = nd_to_bi_hom(a * b)
            map_then_prod = nd_to_bi_hom(a) * nd_to_bi_hom(b)
            assert eq(prod_then_map, map_then_prod, depth=16).kind == "Equal"

    def test_source_must_be_nowhere_dense(self):
        with pytest.raises(ValueError):
            nd_to_bi_hom(zero(CTX.with_family(M0)))

    def test_well_defined_on_classes(self):
        # a ~ a' implies a*b ~ a'*b
        a, a2 = H(), H() * H()
        for b in (smooth("x1"), delta(), H()):
            assert eq(a * b, a2 * b, depth=32).kind == "Equal"

    def test_scaling(self):
        assert eq(elem_scale(delta(), 3), zero(CTX)).kind == "Equal"


class TestOperators:
    def test_parse_slots(self):
        T = DiffOperator.parse("dt(u) + u*dx(u)", 2)
        assert set(T.slots) == {(0, 1), (1, 0), (0, 0)} and T.order == 1

    def test_non_polynomial_use_is_rejected(self):
        with pytest.raises(ValueError):
            DiffOperator.parse("sin(u)", 1)

    @pytest.mark.parametrize("family", [ND, M0])
    def test_shock_is_a_generalized_solution(self, family):
        ctx = AlgebraContext(SPACETIME, Naturals(), family)
        T = DiffOperator.parse("dt(u) + u*dx(u)", 2)
        v = is_generalized_solution(T, shock_net(ctx))
        assert v.kind == "Equal"
        assert v.witness["sigma"].same_points(parse_region("2*x1 - x2 = 0", SPACETIME))

    def test_speed_is_invisible_to_the_quotient(self):
        # the residual still lives on a strip collapsing onto the shock line
        ctx = AlgebraContext(SPACETIME, Naturals(), ND)
        T = DiffOperator.parse("dt(u) + 2*u*dx(u)", 2)
        assert is_generalized_solution(T, shock_net(ctx), depth=16).kind == "Equal"

    def test_source_term_is_not_solved(self):
        ctx = AlgebraContext(SPACETIME, Naturals(), ND)
        T = DiffOperator.parse("dt(u) + u*dx(u) - 1", 2)
        assert is_generalized_solution(T, shock_net(ctx), depth=16).kind == "NotEqual"

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            apply_operator(DiffOperator.parse("dx(u)", 2), H())
