from fractions import Fraction as F

import pytest

from corpus import OMEGA1, SPACETIME, bump_at_half, delta_1d, diag, heaviside_defect, shock_residual, zero_net
from foamlab.certs import BAIRE_I, M0, ND, CertificateError, PointwiseCertificate, StageShells
from foamlab.collapse import (NotFound, bad_points_near, brute_force_membership, calibrate_radius, collapse,
                              find_uniform_patch, limit_set, simplest_between, stable_profile,
                              synthesize_certificate)
from foamlab.descriptors import Exact
from foamlab.nets import Naturals
from foamlab.parser import parse_region
from foamlab.region import volume


def R(text, omega=OMEGA1):
    return parse_region(text, omega)


class TestUniformPatch:
    A = "1/4 < x1 < 1/2"

    def test_delta_vanishes_on_patch_from_position_four(self):
        U, nu = find_uniform_patch(delta_1d(), None, R(self.A))
        assert U.same_points(R(self.A)) and nu == 4

    def test_zero_net_from_position_one(self):
        U, nu = find_uniform_patch(zero_net(), None, R(self.A))
        assert nu == 1

    def test_patch_straddling_the_origin_shrinks(self):
        U, nu = find_uniform_patch(delta_1d(), None, R("-1/2 < x1 < 1/2"))
        assert U.is_open() and not U.contains_point((F(0),))

    def test_nowhere_vanishing_net_has_no_patch(self):
        res = find_uniform_patch(diag(OMEGA1, Naturals(), "2 + x1"), None, R(self.A), depth=16)
        assert isinstance(res, NotFound)

    def test_rejects_closed_set(self):
        with pytest.raises(ValueError, match="open"):
            find_uniform_patch(delta_1d(), None, R("x1 <= 0"))


class TestProfile:
    def test_stable_profile_is_increasing(self):
        stages = stable_profile(delta_1d(), 16)
        for a, b in zip(stages, stages[1:]):
            assert a.subset_of(b)

    def test_limit_set_of_delta(self):
        assert limit_set(delta_1d(), 64).same_points(R("x1 = 0"))

    def test_simplest_rational(self):
        assert simplest_between(F(3, 10), F(2, 5)) == F(1, 3)

    def test_radius_calibration(self):
        stages = [s.interior() for s in stable_profile(delta_1d(), 64)]
        C, shells = calibrate_radius(R("x1 = 0"), stages, 64)
        assert C is not None and C >= 1
        assert shells.radius(10) == F(C, 10)


class TestCollapse:
    def test_delta(self):
        c = synthesize_certificate(delta_1d(), BAIRE_I)
        rep = collapse(delta_1d(), c)
        assert rep.gamma.same_points(R("x1 = 0"))
        assert rep.nowhere_dense and rep.uniform.kind == "Verified"

    def test_heaviside_defect(self):
        u = heaviside_defect(2)
        rep = collapse(u, synthesize_certificate(u, BAIRE_I))
        assert rep.gamma.same_points(R("x1 = 0")) and rep.uniform.kind == "Verified"

    def test_zero_net_has_empty_gamma(self):
        rep = collapse(zero_net(), synthesize_certificate(zero_net(), BAIRE_I))
        assert rep.gamma.is_empty() and rep.uniform.kind == "Verified"
        assert all(nu == 1 for _, nu in rep.patches)

    def test_report_json_keys(self):
        rep = collapse(delta_1d(), synthesize_certificate(delta_1d(), BAIRE_I))
        assert set(rep.to_json()) >= {"gamma", "gamma_nowhere_dense", "patches", "floor_cells",
                                      "deferred_cells", "uniform_check"}

    def test_unverified_certificate_is_rejected(self):
        shells = StageShells(lambda m: R(f"x1 <= -1/(2*{m}) | x1 >= 1/(2*{m})"), lambda m: F(1, 2 * m))
        with pytest.raises(CertificateError):
            collapse(delta_1d(), PointwiseCertificate(Exact(R("x1 = 0")), shells, ND))


class TestSynthesis:
    def test_delta(self):
        c = synthesize_certificate(delta_1d(), ND)
        assert c.sigma.truncate(64).same_points(R("x1 = 0"))

    def test_bump_is_not_certifiable(self):
        assert synthesize_certificate(diag(OMEGA1, Naturals(), "bump(x1)"), ND, 16) is None

    def test_shock_residual_in_measure_zero_family(self):
        u = shock_residual()
        c = synthesize_certificate(u, M0)
        sing = c.sigma.truncate(64)
        assert sing.same_points(parse_region("2*x1 = x2", SPACETIME))
        assert volume(sing.closure()) == 0


class TestOracle:
    def test_zero_net_has_no_bad_points(self):
        res = brute_force_membership(zero_net(), depth=16)
        assert res.verdict.kind == "NoCounterexample" and not res.bad.any()

    def test_delta_bad_points_hug_the_origin(self):
        res = brute_force_membership(delta_1d())
        assert res.verdict.kind == "NoCounterexample"
        bad = res.bad_points()
        assert bad and all(abs(x[0]) < F(1, 64) for x in bad)
        assert bad_points_near(R("x1 = 0"), res) == []

    def test_bump_gives_counterexample(self):
        res = brute_force_membership(diag(OMEGA1, Naturals(), "bump(x1)"), depth=16)
        assert res.verdict.kind == "Counterexample"

    def test_single_set_family_reports_stray_points(self):
        from foamlab.certs import SingleSet
        res = brute_force_membership(bump_at_half(), SingleSet(Exact(R("x1 = 0"))), depth=16)
        assert res.verdict.kind == "Counterexample"

    def test_coarse_grid_is_rejected(self):
        with pytest.raises(ValueError):
            brute_force_membership(zero_net(), h=F(1, 4))
