import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hybridreach import bundled
from hybridreach.errors import InputError, ModelViolation, ZenoError
from hybridreach.model import estimate_constants
from hybridreach.trajectory import (
    AutonomousHit,
    ControlledJump,
    ControlPolicy,
    ControlSchedule,
    PlannedJump,
    Reach,
    SkippedJump,
    Truncated,
    _affine_rk4,
    _rk4,
    apply_autonomous_jump,
    evaluate_cost,
    first_hitting_time,
    integrate_arc,
    policy_from_dict,
    simulate,
    write_trajectory_csv,
)

from .conftest import CHAIN2D_J, CHAIN3_J, E1_J, E2_V0, E4_J, make_system


class TestControlSchedule:
    def test_right_continuous_pieces(self):
        s = ControlSchedule([1.0, 2.0], [[0.0], [1.0], [2.0]])
        assert s(0.5)[0] == 0.0
        assert s(1.0)[0] == 1.0
        assert s(5.0)[0] == 2.0

    def test_next_break(self):
        s = ControlSchedule([1.0, 2.0], [[0.0], [1.0], [2.0]])
        assert s.next_break(0.0) == 1.0
        assert s.next_break(1.0) == 2.0
        assert s.next_break(2.0) == math.inf

    def test_invalid(self):
        with pytest.raises(InputError):
            ControlSchedule([1.0], [[0.0]])
        with pytest.raises(InputError):
            ControlSchedule([2.0, 1.0], [[0.0], [1.0], [2.0]])

    def test_policy_from_dict(self):
        p = policy_from_dict({"u": {"breaks": [0.1], "values": [[-1.0], [1.0]]},
                              "controlled": [{"dest": [1.3], "mode": 0}], "v": [1, 0]}, 1)
        assert p.jumps == (PlannedJump((1.3,), 0, None),)
        assert p.choose_v(0, None, 0) == 1
        assert p.choose_v(5, None, 0) == 0

    def test_policy_dimension_checked(self):
        with pytest.raises(InputError):
            policy_from_dict({"u": {"breaks": [], "values": [[0.0, 1.0]]}}, 1)


class TestStepper:
    """The affine stepper is the classical RK4 update."""

    @settings(max_examples=50)
    @given(
        arrays(float, (2, 2), elements=st.floats(-2, 2)),
        arrays(float, 2, elements=st.floats(-2, 2)),
        arrays(float, 2, elements=st.floats(-2, 2)),
        st.floats(1e-4, 0.5),
    )
    def test_matches_generic_rk4(self, A, b, x, h):
        generic = _rk4(lambda y: A @ y + b, x, h)
        assert np.allclose(_affine_rk4(A, b)(x, h), generic, rtol=1e-12, atol=1e-12)

    def test_fourth_order_on_exponential(self):
        A, b = np.array([[-1.0]]), np.zeros(1)
        errs = []
        for n in (10, 20, 40):
            step, x = _affine_rk4(A, b), np.ones(1)
            for _ in range(n):
                x = step(x, 1.0 / n)
            errs.append(abs(x[0] - math.exp(-1.0)))
        slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(slopes > 3.8)


class TestIntegrateArc:
    def test_time_out(self, line_system):
        arc, reason = integrate_arc(line_system, [-1.0], 0, np.zeros(1), 0.5, 0.1, detect=())
        assert reason == "time-out"
        assert arc.t_end == pytest.approx(0.5)
        assert arc.x_end[0] == pytest.approx(-0.5)
        # endpoints interleaved with midpoints
        assert len(arc.times) == 2 * arc.n_steps + 1

    def test_target_event_localized(self, line_system):
        arc, reason = integrate_arc(line_system, [0.0], 0, np.zeros(1), 5.0, 0.3)
        assert reason == "hit-Gamma"
        assert arc.t_end == pytest.approx(1.0, abs=1e-8)

    def test_domain_exit(self):
        sys_ = make_system(lambda r: r["modes"][0]["dynamics"].update(c=[-1.0]))
        with pytest.raises(ModelViolation):
            integrate_arc(sys_, [0.0], 0, np.zeros(1), 5.0, 0.1)
        _, reason = integrate_arc(sys_, [0.0], 0, np.zeros(1), 5.0, 0.1, on_exit="stop")
        assert reason == "exit-domain"

    def test_start_outside_domain(self, line_system):
        with pytest.raises(InputError):
            integrate_arc(line_system, [5.0], 0, np.zeros(1), 1.0, 0.1)

    def test_bad_step(self, line_system):
        with pytest.raises(InputError):
            integrate_arc(line_system, [0.0], 0, np.zeros(1), 1.0, 0.0)


class TestHitting:
    def test_e1_first_hit(self, e1):
        # speed 1 towards A = {x <= 0} from x = 0.5
        assert first_hitting_time(e1.system, [0.5], 0, np.zeros(1), 5.0) == pytest.approx(0.5, abs=1e-8)

    def test_no_jump_set(self, e2):
        assert first_hitting_time(e2.system, [0.0], 0, np.ones(1), 5.0) == math.inf

    def test_e4_jump(self, e4):
        y, q = apply_autonomous_jump(e4.system, np.array([1.0]), 0, 0)
        assert q == 1 and y[0] == 0.0

    def test_jump_outside_A(self, e4):
        with pytest.raises(InputError):
            apply_autonomous_jump(e4.system, np.array([0.5]), 0, 0)

    def test_jump_outside_D(self):
        def patch(r):
            r["jumps"] = {"sets": [{"A": {"type": "box", "lo": [1.5], "hi": [2.0]},
                                    "D": {"type": "box", "lo": [-0.2], "hi": [0.2]}}],
                          "maps": [{"mode": 0, "v": 0, "target": 0, "G": [[0.0]], "b": [0.5]}]}
        with pytest.raises(ModelViolation):
            apply_autonomous_jump(make_system(patch), np.array([1.6]), 0, 0)


class TestSimulate:
    def test_e4_events_and_cost(self, e4):
        tr = simulate(e4.system, [0.0], 0, e4.policy, 10.0)
        assert [type(e) for e in tr.events] == [AutonomousHit, Reach]
        assert tr.events[0].t == pytest.approx(1.0, abs=1e-9)
        assert tr.reach_time == pytest.approx(2.0, abs=1e-9)
        assert float(evaluate_cost(e4.system, tr, e4.policy)) == pytest.approx(E4_J, abs=1e-9)

    def test_e1_cost(self, e1):
        tr = simulate(e1.system, [0.5], 0, e1.policy, 10.0)
        assert tr.hits[0].t == pytest.approx(0.5, abs=1e-9)
        assert float(evaluate_cost(e1.system, tr, e1.policy)) == pytest.approx(E1_J, abs=1e-9)

    @given(st.floats(-1.0, 0.99))
    @settings(max_examples=25, deadline=None)
    def test_e2_cost_closed_form(self, x0):
        e2 = bundled("e2")
        pol = ControlPolicy.constant([1.0])
        tr = simulate(e2.system, [x0], 0, pol, 10.0)
        assert float(evaluate_cost(e2.system, tr, pol)) == pytest.approx(1 - math.exp(-(1 - x0)), abs=1e-9)

    def test_e2_initial_value(self, e2):
        tr = simulate(e2.system, [0.0], 0, e2.policy, 10.0)
        assert float(evaluate_cost(e2.system, tr, e2.policy)) == pytest.approx(E2_V0, abs=1e-9)

    def test_shortcut_controlled_jump(self):
        inst = bundled("shortcut")
        tr = simulate(inst.system, inst.initial[0], 0, inst.policy, 10.0)
        jumps = tr.controlled_jumps
        assert len(jumps) == 1 and jumps[0].t == pytest.approx(0.1, abs=1e-9)
        assert tr.reach_time == pytest.approx(0.8, abs=1e-9)
        oracle = 1 - math.exp(-0.8) + 0.3 * math.exp(-0.1)
        assert float(evaluate_cost(inst.system, tr, inst.policy)) == pytest.approx(oracle, abs=1e-9)

    def test_scheduled_jump_outside_C_is_skipped(self):
        inst = bundled("shortcut")
        pol = ControlPolicy(ControlSchedule.constant([1.0]), jumps=(PlannedJump((1.3,), 0, 0.2),))
        tr = simulate(inst.system, [0.0], 0, pol, 10.0)
        assert isinstance(tr.events[0], SkippedJump)
        assert tr.reach_time == pytest.approx(2.0, abs=1e-9)

    def test_destination_outside_D(self):
        inst = bundled("shortcut")
        pol = ControlPolicy(ControlSchedule.constant([-1.0]), jumps=(PlannedJump((0.0,), 0),))
        with pytest.raises(ModelViolation):
            simulate(inst.system, [-0.5], 0, pol, 10.0)

    @pytest.mark.parametrize("name, oracle", [("chain3", CHAIN3_J), ("chain2d", CHAIN2D_J)])
    def test_against_independent_integrator(self, name, oracle):
        inst = bundled(name)
        tr = simulate(inst.system, inst.initial[0], inst.initial[1], inst.policy, 20.0, dt=0.0125)
        assert float(evaluate_cost(inst.system, tr, inst.policy)) == pytest.approx(oracle, abs=1e-8)

    def test_chain3_hits_twice(self):
        inst = bundled("chain3")
        tr = simulate(inst.system, [0.0], 0, inst.policy, 20.0)
        assert [h.q for h in tr.hits] == [0, 1]

    def test_truncation_bound(self, e2):
        pol = ControlPolicy.constant([0.0])
        tr = simulate(e2.system, [0.0], 0, pol, 2.0)
        assert isinstance(tr.final, Truncated)
        assert tr.reach_time == math.inf
        cost = evaluate_cost(e2.system, tr, pol)
        assert cost.running == pytest.approx(1 - math.exp(-2.0), abs=1e-9)
        bound = estimate_constants(e2.system, require_transversality=False).value_bound(0.0)
        assert cost.truncation_bound == pytest.approx(math.exp(-2.0) * bound)

    def test_cost_needs_matching_policy(self, e4):
        tr = simulate(e4.system, [0.0], 0, e4.policy, 10.0)
        with pytest.raises(InputError):
            evaluate_cost(e4.system, tr, ControlPolicy.constant([0.0]))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_zeno_guard(self):
        def patch(r):
            r["jumps"] = {"sets": [{"A": {"type": "box", "lo": [0.5], "hi": [2.0]},
                                    "D": {"type": "box", "lo": [0.5], "hi": [1.0]}}],
                          "maps": [{"mode": 0, "v": 0, "target": 0, "G": [[0.0]], "b": [0.6]}]}
            r["target"]["region"] = {"type": "halfspace", "normal": [-1.0], "offset": -1.9}
        with pytest.raises(ZenoError):
            simulate(make_system(patch), [0.0], 0, ControlPolicy.constant([0.0]), 5.0)

    def test_dwell_violation_warns(self):
        def patch(r):
            r["jumps"] = {"sets": [{"A": {"type": "box", "lo": [1.0], "hi": [1.5]},
                                    "D": {"type": "box", "lo": [0.4], "hi": [0.6]}}],
                          "maps": [{"mode": 0, "v": 0, "target": 0, "G": [[0.0]], "b": [0.5]}]}
            r["target"]["region"]["offset"] = -1.9
            r["declared_constants"]["beta"] = 2.0
        with pytest.warns(RuntimeWarning):
            tr = simulate(make_system(patch), [0.0], 0, ControlPolicy.constant([0.0]), 2.2)
        assert tr.dwell_violations >= 1
        assert len(tr.hits) == 3


class TestTrajectoryCSV:
    def test_e4_rows(self, e4, tmp_path):
        tr = simulate(e4.system, [0.0], 0, e4.policy, 10.0, dt=0.1)
        path = tmp_path / "t.csv"
        write_trajectory_csv(tr, path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["t", "mode", "x0", "event"]
        events = [(float(r[0]), r[3]) for r in rows[1:] if r[3]]
        assert [e[1] for e in events] == ["autonomous", "autonomous-post", "reach"]
        assert events[0][0] == pytest.approx(1.0, abs=1e-9)
        assert events[-1][0] == pytest.approx(2.0, abs=1e-9)
        times = [float(r[0]) for r in rows[1:]]
        assert times == sorted(times)

    def test_controlled_jump_rows(self, tmp_path):
        inst = bundled("shortcut")
        tr = simulate(inst.system, [-0.5], 0, inst.policy, 10.0)
        write_trajectory_csv(tr, tmp_path / "s.csv")
        tags = [r[-1] for r in csv.reader(open(tmp_path / "s.csv")) if r[-1] and r[-1] != "event"]
        assert tags == ["controlled", "controlled-post", "reach"]
        assert isinstance(tr.events[0], ControlledJump)
