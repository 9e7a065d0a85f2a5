from fractions import Fraction as F

import pytest

from corpus import OMEGA1, delta_1d, diag, heaviside_defect, zero_net
from foamlab.certs import (BAIRE_I, M0, ND, CertificateError, FamilyMismatch, FiniteShells,
                           PointwiseCertificate, SingleSet, StageShells, UniformCertificate, check_pointwise,
                           check_uniform, compose_add, compose_mul_ideal, derive_certificate, neutrix_check,
                           uniform_to_pointwise)
from foamlab.descriptors import CountableUnion, Exact, MeasureZero
from foamlab.nets import Naturals, net_add, net_diff, net_mul
from foamlab.parser import parse_region
from foamlab.region import RegionSet


def R(text):
    return parse_region(text, OMEGA1)


ORIGIN = Exact(R("x1 = 0"))


def delta_shells():
    return StageShells(lambda m: R(f"x1 <= -1/{m} | x1 >= 1/{m}"), lambda m: F(1, m), "|x1| >= 1/m", "1/m")


def open_shells():
    return StageShells(lambda m: R(f"x1 < -1/{m} | x1 > 1/{m}"), lambda m: F(1, m), "|x1| > 1/m", "1/m")


class TestPointwise:
    def test_zero_net_with_empty_singular_set(self):
        c = PointwiseCertificate(Exact(RegionSet.empty(OMEGA1)), FiniteShells(((RegionSet.full(OMEGA1), 1),)), ND)
        assert check_pointwise(zero_net(), c).kind == "Verified"

    @pytest.mark.parametrize("depth", [8, 32, 64])
    def test_delta_is_an_ideal_member(self, depth):
        v = check_pointwise(delta_1d(), PointwiseCertificate(ORIGIN, delta_shells(), ND), depth)
        assert v.kind == "Verified" and v.depth == depth

    def test_delta_with_first_category_set(self):
        rationals = CountableUnion(OMEGA1, "rationals")
        v = check_pointwise(delta_1d(), PointwiseCertificate(rationals, delta_shells(), BAIRE_I))
        assert v.kind == "Verified"

    def test_delta_in_measure_zero_family(self):
        v = check_pointwise(delta_1d(), PointwiseCertificate(MeasureZero((ORIGIN,)), delta_shells(), M0))
        assert v.kind == "Verified"

    def test_single_set_family(self):
        fam = SingleSet(ORIGIN)
        assert check_pointwise(delta_1d(), PointwiseCertificate(ORIGIN, delta_shells(), fam)).kind == "Verified"

    def test_diagonal_bump_is_refuted_at_origin(self):
        u = diag(OMEGA1, Naturals(), "bump(x1)")
        cert = PointwiseCertificate(Exact(R("x1 = 1/2")), StageShells(
            lambda m: R(f"x1 <= 1/2 - 1/{m} | x1 >= 1/2 + 1/{m}"), lambda m: F(1, m)), ND)
        v = check_pointwise(u, cert)
        assert v.kind == "Refuted"
        assert abs(v.witness["value"]) > 1e-9

    def test_shell_too_close_to_singularity_is_refuted(self):
        shells = StageShells(lambda m: R(f"x1 <= -1/(2*{m}) | x1 >= 1/(2*{m})"), lambda m: F(1, 2 * m))
        v = check_pointwise(delta_1d(), PointwiseCertificate(ORIGIN, shells, ND))
        assert v.kind == "Refuted"

    def test_coverage_gap_raises(self):
        shells = StageShells(lambda m: R(f"x1 >= 1/{m}"), lambda m: F(1, m))
        with pytest.raises(CertificateError, match="coverage"):
            check_pointwise(delta_1d(), PointwiseCertificate(ORIGIN, shells, ND))

    def test_non_decaying_radius_raises(self):
        shells = StageShells(lambda m: R("x1 <= -1/2 | x1 >= 1/2"), lambda m: F(1, 2))
        with pytest.raises(CertificateError, match="decay"):
            check_pointwise(delta_1d(), PointwiseCertificate(ORIGIN, shells, ND))

    def test_full_box_singularity_is_not_admissible(self):
        v = check_pointwise(delta_1d(), PointwiseCertificate(Exact(R("-1/2 <= x1 <= 1/2")), delta_shells(), ND))
        assert v.kind == "Unknown"


class TestUniform:
    def patches(self):
        return StageShells(lambda m: R(f"x1 > 1/{m} | x1 < -1/{m}"), lambda m: F(1, m), "|x1| > 1/m")

    def test_heaviside_defect(self):
        c = UniformCertificate(R("x1 = 0"), self.patches(), ND)
        assert check_uniform(heaviside_defect(2), c).kind == "Verified"

    def test_full_gamma_is_malformed(self):
        c = UniformCertificate(RegionSet.full(OMEGA1), self.patches(), ND)
        with pytest.raises(CertificateError, match="malformed"):
            check_uniform(heaviside_defect(2), c)

    def test_zero_net(self):
        c = UniformCertificate(RegionSet.empty(OMEGA1), FiniteShells(((RegionSet.full(OMEGA1), 1),)), ND)
        assert check_uniform(zero_net(), c).kind == "Verified"

    def test_derivative_keeps_uniform_certificate(self):
        c = UniformCertificate(R("x1 = 0"), self.patches(), ND)
        d = derive_certificate(c, (1,))
        assert d is c
        assert check_uniform(net_diff(heaviside_defect(2), (1,)), d).kind == "Verified"

    def test_uniform_to_pointwise(self):
        c = uniform_to_pointwise(UniformCertificate(R("x1 = 0"), self.patches(), ND))
        assert check_pointwise(heaviside_defect(2), c).kind == "Verified"


class TestTransforms:
    @pytest.mark.parametrize("p", [(1,), (2,), (3,)])
    def test_derived_certificate_reverifies(self, p):
        c = PointwiseCertificate(ORIGIN, delta_shells(), ND)
        d = derive_certificate(c, p)
        assert d.shells.stage(4).is_open()
        assert check_pointwise(net_diff(delta_1d(), p), d).kind == "Verified"

    def test_zero_multi_index_is_identity(self):
        c = PointwiseCertificate(ORIGIN, delta_shells(), ND)
        assert derive_certificate(c, (0,)) is c

    def test_compose_add_with_itself(self):
        c = PointwiseCertificate(ORIGIN, delta_shells(), ND)
        u = delta_1d()
        assert check_pointwise(net_add(u, u), compose_add(c, c)).kind == "Verified"

    def test_compose_add_takes_larger_threshold(self):
        a = PointwiseCertificate(ORIGIN, FiniteShells(((R("x1 > 0"), 3),)), ND)
        b = PointwiseCertificate(ORIGIN, FiniteShells(((R("x1 > -1/2"), 5),)), ND)
        s = compose_add(a, b).shells
        assert s.stage(4).is_empty()
        assert s.stage(5).same_points(R("x1 > 0"))

    def test_compose_add_family_mismatch(self):
        a = PointwiseCertificate(ORIGIN, delta_shells(), ND)
        b = PointwiseCertificate(ORIGIN, delta_shells(), BAIRE_I)
        with pytest.raises(FamilyMismatch):
            compose_add(a, b)

    def test_compose_add_of_different_sets(self):
        a = PointwiseCertificate(ORIGIN, delta_shells(), ND)
        shifted = StageShells(lambda m: R(f"x1 <= 1/2 - 1/{m} | x1 >= 1/2 + 1/{m}"), lambda m: F(1, m))
        b = PointwiseCertificate(Exact(R("x1 = 1/2")), shifted, ND)
        c = compose_add(a, b)
        assert c.sigma.truncate(1).same_points(R("x1 = 0 | x1 = 1/2"))

    def test_compose_mul_ideal_with_coordinate(self):
        u = delta_1d()
        v = diag(OMEGA1, Naturals(), "x1")
        c = compose_mul_ideal(PointwiseCertificate(ORIGIN, delta_shells(), ND), v)
        assert check_pointwise(net_mul(u, v), c).kind == "Verified"


class TestNeutrix:
    def test_bump_is_outside_every_family(self):
        psi = diag(OMEGA1, Naturals(), "bump(x1)").diagonal
        for fam in (ND, BAIRE_I, M0):
            assert neutrix_check(psi, fam)

    def test_zero_is_the_zero_class(self):
        psi = diag(OMEGA1, Naturals(), "0").diagonal
        assert not neutrix_check(psi, ND)
