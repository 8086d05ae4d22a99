import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridreach import bundled
from hybridreach.errors import AssumptionViolation, InputError
from hybridreach.model import (
    AffineDynamics,
    AffineExpr,
    BoxControls,
    ConstantsEstimate,
    ControlledJumpCost,
    FiniteControls,
    Jump,
    estimate_constants,
    transversality_margin,
    validate_assumptions,
)

from .conftest import make_system

VALID = ["e1", "e4", "chain3", "chain2d"]


class TestControlSets:
    def test_box_discretization_has_vertices_and_midpoints(self):
        u = BoxControls([-1.0], [1.0]).discretize(3)
        assert sorted(u.ravel().tolist()) == [-1.0, 0.0, 1.0]

    def test_box_discretization_2d(self):
        u = BoxControls([-1.0, 0.0], [1.0, 2.0]).discretize(3)
        assert u.shape == (9, 2)

    def test_finite_set_is_its_own_discretization(self):
        pts = [[0.0], [0.5]]
        assert np.array_equal(FiniteControls(pts).discretize(5), np.array(pts))

    def test_membership(self):
        assert BoxControls([-1.0], [1.0]).contains([0.5])
        assert not BoxControls([-1.0], [1.0]).contains([1.5])


class TestDynamicsAndCosts:
    def test_affine_dynamics_batch(self):
        dyn = AffineDynamics([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [0.0, 0.0], BoxControls([-1.0], [1.0]))
        out = dyn(np.array([[1.0, 2.0], [0.0, -1.0]]), np.array([0.5]))
        assert np.allclose(out, [[2.0, 0.5], [-1.0, 0.5]])

    def test_speed_bound_is_exact_at_vertices(self):
        dyn = AffineDynamics([[0.2]], [[0.5]], [1.0], BoxControls([-0.2], [0.2]))
        from hybridreach.geometry import Box

        # f = 0.2 x + 0.5 u + 1 on [-0.5, 3] x [-0.2, 0.2]: max at x = 3, u = 0.2
        assert dyn.speed_bound(Box([-0.5], [3.0])) == pytest.approx(1.7)
        assert dyn.lipschitz() == pytest.approx(0.2)

    def test_linear_drift_constants(self):
        from hybridreach.geometry import Box

        # f = 2x + u on [0, 1] x [-1, 1]: |f| peaks at x = 1, u = 1
        dyn = AffineDynamics([[2.0]], [[1.0]], [0.0], BoxControls([-1.0], [1.0]))
        assert dyn.speed_bound(Box([0.0], [1.0])) == pytest.approx(3.0)
        assert dyn.lipschitz() == pytest.approx(2.0)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            AffineDynamics([[0.0]], [[1.0, 0.0]], [0.0], BoxControls([-1.0], [1.0]))

    def test_expression_terms(self):
        e = AffineExpr(const=1.0, x=[2.0], u=[0.5], x_norm=1.0, u_norm=3.0)
        # 1 + 2*(-1) + 0.5*2 + |-1| + 3*|2| = 7
        assert e(np.array([-1.0]), np.array([2.0])) == pytest.approx(7.0)

    def test_clamp(self):
        assert AffineExpr(const=5.0, clamp=2.0)(np.zeros(1)) == pytest.approx(2.0)

    def test_running_cost_clamped_by_K0(self):
        sys_ = make_system(lambda r: r["costs"].update(K=[{"const": 0.0, "x": [10.0]}], K0=1.0))
        assert sys_.running_cost(np.array([1.0]), 0, np.zeros(1)) == pytest.approx(1.0)

    def test_controlled_cost(self):
        c = ControlledJumpCost(0.3, dist=2.0)
        assert c(np.array([0.0]), np.array([1.5])) == pytest.approx(3.3)

    def test_jump_map(self):
        j = Jump(0, 0, 1, [[0.0, 0.0], [0.0, 0.5]], [1.0, 0.0])
        assert np.allclose(j(np.array([3.0, 2.0])), [1.0, 1.0])
        assert j.lipschitz() == pytest.approx(0.5)


class TestConstants:
    """Constants derived by hand for the bundled instances."""

    def test_e4(self, e4):
        c = estimate_constants(e4.system)
        assert (c.F, c.L, c.G) == (1.0, 0.0, 0.0)
        assert c.xi0 == pytest.approx(0.5)
        assert c.C == pytest.approx(2.0)
        assert c.P == pytest.approx(2.0)

    def test_chain3(self):
        c = estimate_constants(bundled("chain3").system)
        # slowest crossing speed 0.8 (f = 1 + u at u = -0.2), so xi0 = 0.4
        assert c.xi0 == pytest.approx(0.4)
        assert c.C == pytest.approx(2.5)
        assert c.F == pytest.approx(1.7)
        assert c.G == pytest.approx(0.1)
        assert c.P == pytest.approx(1.7 * 2.5 * 1.1 + 0.1)

    def test_p_consistency_enforced(self):
        with pytest.raises(ValueError):
            ConstantsEstimate(F=1, L=0, G=0, K0=0, K1=0, C0=0, C1=0, H=0, xi0=0.5, beta=0.5, lam=1, C=2, P=3)

    @given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0, 1))
    def test_p_formula(self, F, C, G):
        c = ConstantsEstimate(F=F, L=0, G=G, K0=0, K1=0, C0=0, C1=0, H=0, xi0=1 / (2 * C), beta=0.5, lam=1, C=C,
                              P=F * C * (1 + G) + G)
        assert c.P >= G

    def test_value_bound_e4(self, e4):
        c = estimate_constants(e4.system)
        assert c.value_bound(0.0) == pytest.approx(0.5 / (1 - math.exp(-0.5)) + 1.0)

    def test_value_bound_without_jumps_drops_series(self, e2):
        c = estimate_constants(e2.system, require_transversality=False)
        assert c.value_bound(0.0) == pytest.approx(1.0)

    def test_transversality_required(self):
        with pytest.raises(AssumptionViolation):
            estimate_constants(bundled("bad_a5").system)
        c = estimate_constants(bundled("bad_a5").system, require_transversality=False)
        assert math.isnan(c.C) and math.isnan(c.P)

    def test_margin_without_sets_is_infinite(self, line_system):
        assert transversality_margin(line_system, "A") == math.inf


class TestValidation:
    @pytest.mark.parametrize("name", VALID)
    def test_valid_instances_pass(self, name):
        report = validate_assumptions(bundled(name).system)
        assert report.passed, [c.name for c in report.failures()]

    @pytest.mark.parametrize(
        "name, check, witness",
        [("bad_a5", "A5_transversality", None), ("bad_a6", "A6_separation", 0.1),
         ("bad_a8", "A8_target_separation", 0.0), ("bad_a12", "A12_Cc_triangle", 1.0)],
    )
    def test_broken_instances_fail_their_check(self, name, check, witness):
        report = validate_assumptions(bundled(name).system)
        assert not report.passed
        assert check in [c.name for c in report.failures()]
        if witness is not None:
            assert report[check].witness == pytest.approx(witness, abs=1e-6)

    def test_speed_control_target_fails_target_transversality(self, e2):
        # f = u with u = 0 admissible: the flow need not cross dGamma
        report = validate_assumptions(e2.system)
        assert not report["A9_target_transversality"].passed

    def test_report_serializes(self, e4):
        d = validate_assumptions(e4.system).to_dict()
        assert d["passed"] is True
        assert {c["name"] for c in d["checks"]} >= {"A5_transversality", "A6_separation", "A8_target_separation"}

    def test_domain_exit_is_soft(self, e2):
        report = validate_assumptions(e2.system)
        assert report["A2_domain_exit"].hard is False

    def test_deterministic_given_seed(self, e4):
        a = validate_assumptions(e4.system, seed=5).to_dict()
        b = validate_assumptions(e4.system, seed=5).to_dict()
        assert a == b
