import numpy as np
import pytest

from isotruss import barrier, controller, estimator, truss
from isotruss.barrier import BarrierParams
from isotruss.controller import Controller, ControlSpec, build_b_move, solve_step
from isotruss.plant import Plant, PlantConfig


def make_spec(x0, goal_offset=(0.0, 0.0), **kw):
    goal = x0[4:6] + np.asarray(goal_offset)
    return ControlSpec(target_vertex=2, goal_position=goal, **kw)


class TestObjective:
    def test_zero_velocity(self, topo, x0):
        L0 = truss.edge_length_vector(topo, x0)
        assert controller.objective(topo, x0, np.zeros(12), L0, 0.1) == 0.0

    def test_null_space_velocity_free(self, topo, x0):
        L0 = truss.edge_length_vector(topo, x0)
        v = np.zeros(12)
        v[0::2] = 1.0  # rigid translation, annihilated by the rigidity matrix
        assert controller.objective(topo, x0, v, L0, 0.0) == pytest.approx(0.0, abs=1e-24)

    def test_nominal_pose_drops_formation_term(self, topo, x0, rng):
        L0 = truss.edge_length_vector(topo, x0)
        R = truss.rigidity_matrix(topo, x0)
        v = rng.normal(size=12)
        expected = float((R @ v) @ (R @ v))
        assert controller.objective(topo, x0, v, L0, 0.7) == pytest.approx(expected)


class TestBuildBMove:
    def test_goal_reached(self, topo, x0):
        spec = make_spec(x0)
        assert np.allclose(build_b_move(x0, spec), 0.0)

    def test_saturation(self, topo, x0):
        spec = make_spec(x0, (1.0, 0.0), speed_limit=0.1)
        assert np.allclose(build_b_move(x0, spec), [0.1, 0.0])

    def test_unsaturated_error_over_dt(self, topo, x0):
        spec = make_spec(x0, (0.02, 0.0), speed_limit=0.1)
        assert np.allclose(build_b_move(x0, spec), [0.04, 0.0])


class TestSolveStep:
    def test_goal_at_rest_zero_solution(self, topo, x0):
        res = solve_step(topo, x0, make_spec(x0))
        assert res.status == "optimal"
        assert np.allclose(res.xdot, 0.0)
        assert np.allclose(res.ddot, 0.0)
        assert res.objective == pytest.approx(0.0, abs=1e-18)

    def test_residual_contract(self, topo, x0):
        res = solve_step(topo, x0, make_spec(x0, (0.5, 0.2)))
        assert res.status == "optimal"
        for family in ("move", "fixed", "loop", "broken"):
            assert res.constraint_residuals[family] <= 1e-6

    def test_broken_roller_forced_zero_target_still_moves(self, topo, x0):
        spec = make_spec(x0, (0.5, 0.0), broken_rollers=frozenset({0}))
        res = solve_step(topo, x0, spec)
        assert res.status == "optimal"
        assert res.ddot[0] == 0.0
        assert np.allclose(res.xdot[4:6], [0.1, 0.0], atol=1e-8)
        # the constraint row keeps the underlying solution at zero too
        ik = truss.inverse_kinematics(topo, x0, res.xdot)
        assert abs(ik[0]) <= 1e-8

    def test_unaware_ignores_broken_set(self, topo, x0):
        spec = make_spec(x0, (0.5, 0.0), broken_rollers=frozenset({0}),
                         failure_aware=False)
        res = solve_step(topo, x0, spec)
        assert abs(res.ddot[0]) > 1e-6

    def test_deterministic(self, topo, x0):
        spec = make_spec(x0, (0.3, -0.2), barrier_enabled=True)
        a = solve_step(topo, x0, spec)
        b = solve_step(topo, x0, spec)
        assert np.array_equal(a.xdot, b.xdot)
        assert np.array_equal(a.ddot, b.ddot)
        assert a.status == b.status

    def test_no_worse_than_feasibility_alone(self, topo, x0, rng):
        # the minimum-norm feasible point is one admissible candidate
        L0 = truss.edge_length_vector(topo, x0)
        spec = make_spec(x0, (0.4, 0.1))
        res = solve_step(topo, x0, spec, L0)
        cs = truss.constraint_rows(topo, x0, 2, build_b_move(x0, spec))
        A, b = cs.stacked()
        v_p, *_ = np.linalg.lstsq(A, b, rcond=None)
        assert res.objective <= controller.objective(topo, x0, v_p, L0, spec.k_f) + 1e-12

    def test_all_rollers_broken_blocks_motion(self, topo, x0):
        spec = make_spec(x0, (0.5, 0.0), broken_rollers=frozenset(range(6)))
        res = solve_step(topo, x0, spec)
        assert res.status == "infeasible"
        assert np.allclose(res.ddot, 0.0)

    def test_barrier_inactive_matches_plain(self, topo, x0):
        plain = solve_step(topo, x0, make_spec(x0, (0.3, 0.0)))
        guarded = solve_step(topo, x0, make_spec(x0, (0.3, 0.0), barrier_enabled=True))
        assert guarded.status == "optimal"
        assert np.abs(plain.xdot - guarded.xdot).max() < 1e-10
        assert guarded.constraint_residuals["barrier"] >= -1e-6


class TestBarrierStepping:
    def test_boundary_approach_invariance(self, topo, x0):
        spec = make_spec(x0, (0.0, 10.0), barrier_enabled=True)
        ctrl = Controller(topo, spec, x0)
        params = spec.barrier
        hs = [barrier.barrier(topo, ctrl.x_est, params).h]
        for _ in range(40):
            ctrl.step_open_loop()
            hs.append(barrier.barrier(topo, ctrl.x_est, params).h)
        assert min(hs) >= -1e-6
        for a, b in zip(hs, hs[1:]):
            assert b >= (1 - params.alpha) * a - 1e-6
        # it should actually have moved toward the boundary
        assert hs[-1] < 0.5 * hs[0]


class TestSteppers:
    def test_open_and_closed_loop_agree_with_perfect_plant(self, topo, x0):
        spec_ol = make_spec(x0, (0.2, 0.1))
        spec_cl = make_spec(x0, (0.2, 0.1))
        ol = Controller(topo, spec_ol, x0)
        cl = Controller(topo, spec_cl, x0)
        plant = Plant(topo, x0)
        cl.estimator.ingest(plant.read_encoders())
        frame = plant.read_encoders()
        for _ in range(10):
            res_cl = cl.step_closed_loop(frame)
            plant.apply_command(res_cl.ddot, spec_cl.barrier.dt)
            frame = plant.read_encoders()
            ol.step_open_loop()
        # fold the last frame in so both estimates cover the same motion
        cl.estimator.ingest(frame)
        assert np.abs(ol.x_est - cl.x_est).max() <= 1e-6
        assert np.abs(cl.x_est - plant.state.x_true).max() <= 1e-6

    def test_closed_loop_detects_dead_roller(self, topo, x0):
        spec = make_spec(x0, (0.3, 0.0))
        ctrl = Controller(topo, spec, x0)
        plant = Plant(topo, x0, PlantConfig(failed=frozenset({1})))
        frame = plant.read_encoders()
        ctrl.estimator.ingest(frame)
        flagged_at = None
        for k in range(6):
            res = ctrl.step_closed_loop(frame)
            plant.apply_command(res.ddot, spec.barrier.dt)
            frame = plant.read_encoders()
            if 1 in ctrl.detected_failures and flagged_at is None:
                flagged_at = k
        assert flagged_at is not None
        # flagged within 2 steps of the first nonzero command arriving back
        assert flagged_at <= 3
        assert 1 in ctrl.spec.broken_rollers

    def test_warm_start_progress(self, topo, x0):
        spec = make_spec(x0, (0.2, 0.0))
        ctrl = Controller(topo, spec, x0)
        for _ in range(8):
            ctrl.step_open_loop()
        assert np.linalg.norm(ctrl.target_position() - spec.goal_position) < 0.01
