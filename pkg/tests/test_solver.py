import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridreach import bundled
from hybridreach.errors import ConfigurationError, InputError
from hybridreach.model import estimate_constants
from hybridreach.solver import (
    IN_A,
    IN_C,
    IN_GAMMA,
    INTERIOR,
    Grid,
    M_operator,
    N_operator,
    ValueField,
    bellman_step,
    extract_policy,
    hamiltonian,
    read_value_csv,
    solve_qvi,
    value_bound,
    write_policy_csv,
    write_value_csv,
)

from .conftest import E2_V0, E4_J, make_system


class TestGrid:
    def test_e4_classes(self, e4):
        grid = Grid.build(e4.system, 0.1)
        g0, g1 = grid.modes
        x0, x1 = g0.points[:, 0], g1.points[:, 0]
        assert np.all(g0.classes[x0 >= 1.0 - 1e-9] == IN_A)
        assert np.all(g0.classes[x0 < 0.95] == INTERIOR)
        assert np.all(g1.classes[x1 >= 1.0 - 1e-9] == IN_GAMMA)
        assert np.array_equal(g1.in_D, np.abs(x1) <= 0.1 + 1e-9)

    def test_controlled_jump_nodes(self):
        grid = Grid.build(bundled("shortcut").system, 0.1)
        g = grid.modes[0]
        x = g.points[:, 0]
        assert np.all(g.classes[x <= -0.6 + 1e-9] == IN_C)

    def test_bad_spacing(self, e2):
        with pytest.raises(ConfigurationError):
            Grid.build(e2.system, 0.0)

    def test_at_least_two_nodes(self, e2):
        assert Grid.build(e2.system, 100.0).modes[0].shape == (2,)

    @settings(max_examples=30)
    @given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-2, 2))
    def test_interpolation_exact_for_affine(self, x, y, c):
        g = Grid.build(bundled("chain2d").system, 0.1).modes[0]
        a = np.array([0.7, -1.3])
        vals = g.points @ a + c
        p = g.clip(np.array([[x, y]]))
        M = g.interpolation_matrix(p)
        assert float((M @ vals)[0]) == pytest.approx(float(p[0] @ a + c), abs=1e-12)

    def test_interpolation_rows_are_convex(self):
        g = Grid.build(bundled("chain2d").system, 0.1).modes[0]
        rng = np.random.default_rng(0)
        pts = rng.uniform(g.lo - 0.5, g.hi + 0.5, size=(200, 2))
        M = g.interpolation_matrix(pts)
        assert np.allclose(np.asarray(M.sum(axis=1)).ravel(), 1.0)
        assert M.data.min() >= 0.0


class TestOperators:
    def test_hamiltonian_e2(self, e2):
        # sup_u (-1 - u p) = |p| - 1
        assert hamiltonian(e2.system, [0.0], 0, [2.0]) == pytest.approx(1.0)
        assert hamiltonian(e2.system, [0.0], 0, [-0.5]) == pytest.approx(-0.5)

    def test_hamiltonian_vertex(self):
        sys_ = make_system(lambda r: (
            r["modes"][0].update(dynamics={"A": [[0.0]], "B": [[1.0]], "c": [0.0]},
                                 control_set={"type": "box", "lo": [-1.0], "hi": [1.0]}),
            r["costs"].update({"lambda": 2.0, "K": [{"const": 0.0}]})))
        # sup over u in [-1, 1] of -4u / 2
        assert hamiltonian(sys_, [0.0], 0, [4.0]) == pytest.approx(2.0)

    def test_M_on_solved_chain(self, e4_solved, e4):
        from hybridreach.trajectory import ControlPolicy, evaluate_cost, simulate

        field, _ = e4_solved
        pol = ControlPolicy.constant([0.0])
        tr = simulate(e4.system, [0.0], 1, pol, 10.0)
        rolled = float(evaluate_cost(e4.system, tr, pol))
        assert M_operator(e4.system, field, [1.0], 0) == pytest.approx(field([0.0], 1) + 0.5, abs=1e-12)
        assert M_operator(e4.system, field, [1.0], 0) == pytest.approx(rolled + 0.5, abs=3 * 0.01)

    def test_M_e4(self, e4):
        grid = Grid.build(e4.system, 0.1)
        field = ValueField(grid, [np.zeros(grid.modes[0].size), grid.modes[1].points[:, 0] * 2.0])
        # jump to 0 in mode 1 where the field is 0, plus cost 0.5
        assert M_operator(e4.system, field, [1.5], 0) == pytest.approx(0.5)

    def test_N_shortcut(self):
        sys_ = bundled("shortcut").system
        grid = Grid.build(sys_, 0.1)
        field = ValueField(grid, [2.2 - grid.modes[0].points[:, 0]])
        # best destination is the far end of D = [1.2, 1.4]
        assert N_operator(sys_, field, [-0.8], 0) == pytest.approx(0.8 + 0.3)

    def test_N_refinement_never_worse(self):
        sys_ = bundled("shortcut").system
        grid = Grid.build(sys_, 0.3)
        rng = np.random.default_rng(1)
        field = ValueField(grid, [rng.uniform(0, 1, grid.modes[0].size)])
        coarse = N_operator(sys_, field, [-0.8], 0, refine=1)
        fine = N_operator(sys_, field, [-0.8], 0, refine=4)
        assert fine <= coarse + 1e-15

    def test_N_without_destinations(self):
        sys_ = make_system(lambda r: r["costs"].update(C_c=[{"from": 0, "to": 0, "const": 0.1}]))
        grid = Grid.build(sys_, 0.1)
        with pytest.raises(ConfigurationError):
            N_operator(sys_, ValueField.constant(grid, 0.0), [0.0], 0)


def naive_e2_step(xs, V, dt):
    """Scalar oracle for one sweep on the speed-controlled line with target x >= 1."""
    rho, w = math.exp(-dt), 1 - math.exp(-dt)
    out = np.empty_like(V)
    for k, x in enumerate(xs):
        if x >= 1.0 - 1e-9:
            out[k] = 0.0
            continue
        out[k] = min(w + rho * np.interp(np.clip(x + dt * u, xs[0], xs[-1]), xs, V) for u in (-1.0, 0.0, 1.0))
    return out


class TestBellmanStep:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_scalar_oracle(self, seed):
        e2 = bundled("e2")
        grid = Grid.build(e2.system, 0.1)
        V = np.random.default_rng(seed).uniform(-1, 1, grid.modes[0].size)
        new = bellman_step(e2.system, ValueField(grid, [V]), 0.05)
        assert np.allclose(new.values[0], naive_e2_step(grid.modes[0].points[:, 0], V, 0.05), atol=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_monotone_and_contractive(self, seed):
        sys_ = bundled("shortcut").system
        grid = Grid.build(sys_, 0.1)
        rng = np.random.default_rng(seed)
        V = rng.uniform(-1, 1, grid.modes[0].size)
        W = V + rng.uniform(0, 1, V.shape)
        TV = bellman_step(sys_, ValueField(grid, [V]), 0.05).values[0]
        TW = bellman_step(sys_, ValueField(grid, [W]), 0.05).values[0]
        assert np.all(TV <= TW + 1e-14)
        assert np.max(np.abs(TV - TW)) <= math.exp(-0.05) * np.max(np.abs(V - W)) + 1e-14

    def test_dt_above_cfl(self, e2):
        grid = Grid.build(e2.system, 0.1)
        with pytest.raises(ConfigurationError):
            bellman_step(e2.system, ValueField.constant(grid, 0.0), 0.2)

    def test_dt_above_dwell(self, e4):
        # beta/F = 0.5 for e4; dx large enough that the grid condition is not the binding one
        grid = Grid.build(e4.system, 1.0)
        with pytest.raises(ConfigurationError):
            bellman_step(e4.system, ValueField.constant(grid, 0.0), 0.6)


class TestSolve:
    def test_e2_value(self, e2_solved):
        field, report = e2_solved
        assert report.converged
        assert field([0.0], 0) == pytest.approx(E2_V0, abs=3 * 0.01)

    def test_e4_value(self, e4_solved):
        field, report = e4_solved
        assert report.converged
        assert field([0.0], 0) == pytest.approx(E4_J, abs=3 * 0.01)

    def test_target_nodes_hold_terminal_cost(self, e4_solved):
        field, _ = e4_solved
        g = field.grid.modes[1]
        assert np.all(field.values[1][g.classes == IN_GAMMA] == 1.0)

    def test_report(self, e2_solved):
        _, report = e2_solved
        assert report.contraction_factor == pytest.approx(math.exp(-0.005))
        assert report.residual <= 1e-8
        assert report.iterations == len(report.residuals)
        assert "wall_time" not in report.to_dict()

    def test_upper_and_lower_starts_agree(self, e4):
        grid = Grid.build(e4.system, 0.05)
        up, _ = solve_qvi(e4.system, grid, 0.025, tol=1e-10)
        lo, _ = solve_qvi(e4.system, grid, 0.025, tol=1e-10, init="lower")
        assert up.sup_distance(lo) <= 1e-8

    def test_max_iter(self, e2):
        grid = Grid.build(e2.system, 0.1)
        _, report = solve_qvi(e2.system, grid, 0.05, max_iter=3)
        assert not report.converged and report.iterations == 3

    def test_value_bound(self, e4):
        c = estimate_constants(e4.system)
        assert value_bound(c) == pytest.approx(c.value_bound(0.0) + 1.0)

    def test_shortcut_uses_the_jump(self):
        sys_ = bundled("shortcut").system
        grid = Grid.build(sys_, 0.02)
        field, _ = solve_qvi(sys_, grid, 0.01)
        # walk left 0.1, jump to 1.4 at cost 0.3, walk 0.6
        optimum = (1 - math.exp(-0.1)) + math.exp(-0.1) * (0.3 + 1 - math.exp(-0.6))
        assert field([-0.5], 0) == pytest.approx(optimum, abs=3 * 0.02)
        walking = 1 - math.exp(-2.5)
        assert field([-0.5], 0) < walking


class TestPolicyAndFiles:
    def test_e2_policy_moves_right(self, e2_solved, e2):
        field, _ = e2_solved
        table = extract_policy(e2.system, field, 0.005)
        g = field.grid.modes[0]
        flow = g.classes == INTERIOR
        assert np.all(table.u[0][flow, 0] == 1.0)
        assert np.all(np.isnan(table.u[0][g.classes == IN_GAMMA]))

    def test_greedy_policy_reaches_target(self, e2_solved, e2):
        from hybridreach.trajectory import evaluate_cost, simulate

        field, _ = e2_solved
        pol = extract_policy(e2.system, field, 0.005).as_policy()
        tr = simulate(e2.system, [0.0], 0, pol, 5.0)
        assert tr.reached
        assert float(evaluate_cost(e2.system, tr, pol)) == pytest.approx(E2_V0, abs=1e-6)

    def test_shortcut_policy_jumps(self):
        sys_ = bundled("shortcut").system
        grid = Grid.build(sys_, 0.05)
        field, _ = solve_qvi(sys_, grid, 0.025)
        table = extract_policy(sys_, field, 0.025)
        k = table.nearest([-0.8], 0)
        assert table.jump[0][k]
        assert table.dest[0][k][0] == pytest.approx(1.4)

    def test_value_csv_round_trip_is_exact(self, e4_solved, tmp_path):
        field, _ = e4_solved
        paths = write_value_csv(field, tmp_path)
        assert [p.name for p in paths] == ["value_mode0.csv", "value_mode1.csv"]
        again = read_value_csv(field.grid, tmp_path)
        for a, b in zip(field.values, again.values):
            assert np.array_equal(a, b)

    def test_value_csv_grid_mismatch(self, e4_solved, e4, tmp_path):
        field, _ = e4_solved
        write_value_csv(field, tmp_path)
        with pytest.raises(InputError):
            read_value_csv(Grid.build(e4.system, 0.1), tmp_path)

    def test_policy_csv(self, e4_solved, e4, tmp_path):
        field, _ = e4_solved
        write_policy_csv(extract_policy(e4.system, field, 0.005), tmp_path / "p.csv")
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0].startswith("mode,x0,class,u0,v,jump,dest_mode")
        assert len(lines) == 1 + field.grid.size
