import numpy as np
import pytest
from numpy.testing import assert_allclose

from slqmpc.barrier import BarrierConfig, ConeSpec
from slqmpc.models import (
    CostWeights,
    GaitSchedule,
    QuadrupedOcpBuilder,
    RobotParams,
    SwingProfile,
    TaskCommand,
    constraint_dimension,
    default_stance_state,
    dynamic_walk_gait,
    dynamics,
    dynamics_jacobians,
    forward_kinematics,
    friction_constraints,
    mode_constraints,
    nominal_stance_input,
    pace_gait,
    single_step_gait,
    snap_gait_to_lattice,
    stance_gait,
    trot_gait,
)
from slqmpc.models.quadruped import (
    FORCES,
    JOINTS,
    OMEGA,
    POSITION,
    THETA,
    VELOCITY,
    euler_rate_matrix,
    forward_kinematics_full,
    rotation_body_to_world,
    skew,
)
from slqmpc.ocp import TimeGrid, check_derivatives, fd_jacobian

PARAMS = RobotParams()


def random_state(rng, scale=0.3):
    x = default_stance_state(PARAMS).copy()
    x[THETA] += rng.uniform(-scale, scale, 3) * 0.5
    x[POSITION] += rng.uniform(-scale, scale, 3)
    x[OMEGA] += rng.uniform(-1, 1, 3)
    x[VELOCITY] += rng.uniform(-1, 1, 3)
    x[JOINTS] += rng.uniform(-scale, scale, 12)
    return x


def random_input(rng):
    u = np.empty(24)
    u[:12] = rng.normal(0, 40, 12)
    u[12:] = rng.normal(0, 2, 12)
    return u


class TestKinematics:
    def test_zero_link_lengths_give_hip_offsets(self):
        params = RobotParams(link_lengths=(0.0, 0.0))
        feet, _ = forward_kinematics(params.default_joints, params)
        assert_allclose(feet, params.hips, atol=1e-15)

    def test_default_configuration_golden_positions(self):
        # frozen from the analytic kinematics at the default geometry
        feet, _ = forward_kinematics(PARAMS.default_joints, PARAMS)
        expected = np.array(
            [
                [0.3451714, 0.2, -0.47869466],
                [0.3451714, -0.2, -0.47869466],
                [-0.3451714, 0.2, -0.47869466],
                [-0.3451714, -0.2, -0.47869466],
            ]
        )
        assert_allclose(feet, expected, atol=1e-8)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            q = PARAMS.default_joints + rng.uniform(-0.5, 0.5, 12)
            _, jacs = forward_kinematics(q, PARAMS)
            for leg in range(4):
                fd = fd_jacobian(
                    lambda qleg, leg=leg: forward_kinematics(
                        np.concatenate([q[: 3 * leg], qleg, q[3 * leg + 3 :]]), PARAMS
                    )[0][leg],
                    q[3 * leg : 3 * leg + 3],
                )
                assert_allclose(jacs[leg], fd, atol=1e-6)

    def test_jacobian_times_rate_matches_fd_velocity(self):
        rng = np.random.default_rng(1)
        q = PARAMS.default_joints + rng.uniform(-0.3, 0.3, 12)
        qd = rng.standard_normal(12)
        eps = 1e-6
        feet_p, _ = forward_kinematics(q + eps * qd, PARAMS)
        feet_m, _ = forward_kinematics(q - eps * qd, PARAMS)
        fd_vel = (feet_p - feet_m) / (2 * eps)
        _, jacs = forward_kinematics(q, PARAMS)
        for leg in range(4):
            assert_allclose(jacs[leg] @ qd[3 * leg : 3 * leg + 3], fd_vel[leg], atol=1e-6)

    def test_hessian_matches_jacobian_differences(self):
        rng = np.random.default_rng(2)
        q = PARAMS.default_joints + rng.uniform(-0.3, 0.3, 12)
        _, _, hess = forward_kinematics_full(q, PARAMS)
        for leg in range(4):
            qleg = q[3 * leg : 3 * leg + 3]
            fd = fd_jacobian(
                lambda v, leg=leg: forward_kinematics_full(
                    np.concatenate([q[: 3 * leg], v, q[3 * leg + 3 :]]), PARAMS
                )[1][leg].reshape(-1),
                qleg,
            ).reshape(3, 3, 3)
            assert_allclose(hess[leg], fd, atol=1e-6)


class TestDynamics:
    def test_free_fall(self):
        x = default_stance_state(PARAMS)
        u = np.zeros(24)
        xdot = dynamics(x, u, PARAMS)
        assert_allclose(xdot[VELOCITY], [0.0, 0.0, -PARAMS.gravity], atol=1e-12)
        assert_allclose(xdot[OMEGA], 0.0, atol=1e-12)
        assert_allclose(xdot[THETA], 0.0, atol=1e-12)

    def test_static_stance_force_balance(self):
        x = default_stance_state(PARAMS)
        u = nominal_stance_input(PARAMS, (True,) * 4)
        xdot = dynamics(x, u, PARAMS)
        assert_allclose(xdot[VELOCITY], 0.0, atol=1e-10)
        assert_allclose(xdot[OMEGA], 0.0, atol=1e-10)

    def test_joint_integrator(self):
        x = default_stance_state(PARAMS)
        u = np.zeros(24)
        u[12:] = np.arange(12.0)
        assert_allclose(dynamics(x, u, PARAMS)[JOINTS], np.arange(12.0))

    def test_pitch_singularity_guard(self):
        x = default_stance_state(PARAMS).copy()
        x[1] = 1.5
        with pytest.raises(ValueError, match="pitch"):
            dynamics(x, np.zeros(24), PARAMS)

    def test_jacobians_match_finite_differences(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = random_state(rng)
            u = random_input(rng)
            A, B = dynamics_jacobians(x, u, PARAMS)
            fd_A = fd_jacobian(lambda v: dynamics(v, u, PARAMS), x)
            fd_B = fd_jacobian(lambda v: dynamics(x, v, PARAMS), u)
            scale = max(1.0, np.max(np.abs(A)))
            assert np.max(np.abs(A - fd_A)) / scale < 1e-4
            assert np.max(np.abs(B - fd_B)) < 1e-6

    def test_rotation_consistency_along_rollout(self):
        # dR/dt must equal R * skew(omega) along an integrated motion
        rng = np.random.default_rng(4)
        x = random_state(rng)
        u = random_input(rng) * 0.1
        dt = 1e-5
        xdot = dynamics(x, u, PARAMS)
        x_p = x + dt * xdot
        x_m = x - dt * xdot
        dR_fd = (
            rotation_body_to_world(x_p[THETA]) - rotation_body_to_world(x_m[THETA])
        ) / (2 * dt)
        R = rotation_body_to_world(x[THETA])
        assert_allclose(dR_fd, R @ skew(x[OMEGA]), atol=1e-5)

    def test_angular_momentum_conserved_without_forces_or_gravity(self):
        params = RobotParams(gravity=0.0)
        x = default_stance_state(params).copy()
        x[OMEGA] = np.array([0.8, -0.5, 0.3])
        u = np.zeros(24)
        dt = 1e-4
        inertia = params.inertia
        h0 = np.linalg.norm(inertia @ x[OMEGA])
        for _ in range(int(1.0 / dt)):
            k1 = dynamics(x, u, params)
            k2 = dynamics(x + 0.5 * dt * k1, u, params)
            k3 = dynamics(x + 0.5 * dt * k2, u, params)
            k4 = dynamics(x + dt * k3, u, params)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        h1 = np.linalg.norm(inertia @ x[OMEGA])
        assert abs(h1 - h0) < 1e-6


class TestGaits:
    def test_stance_gait_never_switches(self):
        gait = stance_gait()
        for t in np.linspace(0, 10, 50):
            assert gait.contact_flags(t) == (True,) * 4
        assert gait.switch_times(0.0, 10.0).size == 0

    def test_trot_alternates_diagonal_pairs(self):
        gait = trot_gait(cycle=0.8, lead_in=0.3)
        assert gait.contact_flags(0.1) == (True,) * 4
        # first half cycle: LF and RH swing
        assert gait.contact_flags(0.5) == (False, True, True, False)
        assert gait.contact_flags(0.9) == (True, False, False, True)
        assert gait.contact_flags(1.3) == (False, True, True, False)

    def test_pace_alternates_lateral_pairs(self):
        gait = pace_gait(cycle=0.8, lead_in=0.0)
        assert gait.contact_flags(0.1) == (False, True, False, True)
        assert gait.contact_flags(0.5) == (True, False, True, False)

    def test_windows_tile_cycle(self):
        for gait in (trot_gait(), pace_gait(), dynamic_walk_gait()):
            t = np.linspace(gait.lead_in, gait.lead_in + 2 * gait.cycle, 4001)
            stance_counts = np.array([sum(gait.contact_flags(ti)) for ti in t])
            assert stance_counts.min() >= 2
            assert stance_counts.max() <= 4

    def test_dynamic_walk_mixes_two_and_three_support(self):
        gait = dynamic_walk_gait(cycle=1.0, lead_in=0.3)
        t = np.linspace(1.3, 2.3, 2001)[:-1]
        counts = np.array([sum(gait.contact_flags(ti)) for ti in t])
        assert set(counts.tolist()) == {2, 3}
        # steady state alternates between them
        changes = np.abs(np.diff(counts))
        assert np.max(changes) == 1

    def test_single_step_gait(self):
        gait = single_step_gait("LF", 0.7, 1.5)
        assert gait.contact_flags(0.5) == (True,) * 4
        assert gait.contact_flags(1.0) == (False, True, True, True)
        assert gait.contact_flags(1.5) == (True,) * 4

    def test_swing_profile_returns_to_ground(self):
        profile = SwingProfile(lift_off=0.2, touch_down=0.7, apex_height=0.1)
        ts = np.linspace(0.2, 0.7, 1001)
        # velocity integrates to zero net height (trapezoid quadrature)
        vs = np.array([profile.velocity(t) for t in ts])
        net = np.trapezoid(vs, ts)
        assert abs(net) < 1e-12
        assert_allclose(profile.height(0.45), 0.1, atol=1e-12)
        assert profile.height(0.2) == 0.0 and profile.height(0.7) < 1e-30

    def test_swing_profile_velocity_continuous(self):
        profile = SwingProfile(0.0, 0.4, 0.08)
        ts = np.linspace(-0.05, 0.45, 2001)
        vs = np.array([profile.velocity(t) for t in ts])
        assert np.max(np.abs(np.diff(vs))) < 0.01

    def test_snap_to_lattice_aligns_windows(self):
        gait = trot_gait(cycle=0.8, lead_in=0.25)
        snapped = snap_gait_to_lattice(gait, t0=0.0, dt=0.02, t_end=2.0)
        for leg in range(4):
            for a, b in snapped.absolute_windows(leg, 0.0, 2.0):
                assert abs(round(a / 0.02) * 0.02 - a) < 1e-9
                assert abs(round(b / 0.02) * 0.02 - b) < 1e-9

    def test_mode_schedule_switches_on_grid_nodes(self):
        grid = TimeGrid(0.0, 2.0, 0.02)
        sched = trot_gait(cycle=0.8, lead_in=0.31).mode_schedule(grid)
        for t in sched.switch_times:
            assert abs(round(t / 0.02) * 0.02 - t) < 1e-9


class TestModeConstraints:
    def test_full_stance_stationary_is_feasible(self):
        x = default_stance_state(PARAMS)
        u = nominal_stance_input(PARAMS, (True,) * 4)
        values = mode_constraints(x, u, 0.0, stance_gait(), PARAMS, with_jacobians=False)
        assert values.shape == (12,)
        assert_allclose(values, 0.0, atol=1e-12)

    def test_swing_force_rows_report_violation(self):
        gait = single_step_gait("LF", 0.0, 1.0)
        x = default_stance_state(PARAMS)
        u = np.zeros(24)
        u[FORCES][:3] = [1.0, 0.0, 0.0]
        u = np.zeros(24)
        u[0:3] = [1.0, 0.0, 0.0]
        values = mode_constraints(x, u, 0.5, gait, PARAMS, with_jacobians=False)
        # LF swing: 1 velocity row + 3 force rows first
        assert values.shape == (13,)
        assert_allclose(values[1:4], [1.0, 0.0, 0.0])

    def test_trot_mid_phase_dimension(self):
        gait = trot_gait(cycle=0.8, lead_in=0.0)
        flags = gait.contact_flags(0.2)
        assert sum(flags) == 2
        assert constraint_dimension(flags) == 14
        x = default_stance_state(PARAMS)
        values = mode_constraints(x, np.zeros(24), 0.2, gait, PARAMS, with_jacobians=False)
        assert values.shape == (14,)

    def test_jacobians_match_finite_differences(self):
        rng = np.random.default_rng(5)
        gait = trot_gait(cycle=0.8, lead_in=0.0)
        for t in (0.2, 0.6):
            x = random_state(rng)
            u = random_input(rng)
            values, C, D = mode_constraints(x, u, t, gait, PARAMS)
            fd_C = fd_jacobian(
                lambda v: mode_constraints(v, u, t, gait, PARAMS, with_jacobians=False), x
            )
            fd_D = fd_jacobian(
                lambda v: mode_constraints(x, v, t, gait, PARAMS, with_jacobians=False), u
            )
            assert np.max(np.abs(C - fd_C)) < 1e-5
            assert np.max(np.abs(D - fd_D)) < 1e-6

    def test_swing_velocity_row_tracks_profile(self):
        gait = single_step_gait("LF", 0.0, 1.0, swing_height=0.1)
        x = default_stance_state(PARAMS)
        u = np.zeros(24)
        t = 0.25
        c_t = gait.swing_profile(0, t).velocity(t)
        values = mode_constraints(x, u, t, gait, PARAMS, with_jacobians=False)
        # stationary foot: velocity row equals -c(t)
        assert_allclose(values[0], -c_t, atol=1e-12)

    def test_constraint_rank_full_in_trot_and_walk(self):
        rng = np.random.default_rng(6)
        for gait in (trot_gait(cycle=0.8, lead_in=0.0), dynamic_walk_gait(lead_in=0.0)):
            for t in np.linspace(0.05, gait.cycle - 0.05, 7):
                x = random_state(rng, scale=0.1)
                u = random_input(rng)
                _, _, D = mode_constraints(x, u, float(t), gait, PARAMS)
                sv = np.linalg.svd(D, compute_uv=False)
                assert sv[-1] > 1e-8 * sv[0]


class TestFrictionConstraints:
    CONE = ConeSpec(mu_c=0.7)

    def test_vertical_stance_force_value(self):
        u = np.zeros(24)
        u[2] = 100.0
        values = friction_constraints(
            u, (True, False, False, False), self.CONE, 5.0, with_derivatives=False
        )
        assert_allclose(values, [65.0])

    def test_row_counts_follow_stance_set(self):
        u = np.zeros(24)
        assert friction_constraints(u, (True,) * 4, self.CONE, 5.0, False).shape == (4,)
        assert friction_constraints(
            u, (True, False, True, False), self.CONE, 5.0, False
        ).shape == (2,)
        assert friction_constraints(u, (False,) * 4, self.CONE, 5.0, False).shape == (0,)

    def test_derivative_blocks_sit_on_force_columns(self):
        u = np.zeros(24)
        u[2] = 50.0
        u[5] = 80.0
        values, grads, hessians = friction_constraints(
            u, (True, True, False, False), self.CONE, 5.0
        )
        assert values.shape == (2,)
        # gradient support: only that leg's force columns within (x, u)
        nonzero_cols = np.nonzero(grads[0])[0]
        assert set(nonzero_cols).issubset({24, 25, 26})
        nonzero_cols_2 = np.nonzero(grads[1])[0]
        assert set(nonzero_cols_2).issubset({27, 28, 29})
        assert hessians.shape == (2, 48, 48)


class TestCost:
    def make_cost_builder(self):
        task = TaskCommand(target_position=(0.0, 0.0, 0.534), command_time=0.0)
        return QuadrupedOcpBuilder(
            params=PARAMS, gait=stance_gait(), task=task, barrier=None,
            include_inequalities=False,
        )

    def test_nominal_point_costs_nothing(self):
        x = default_stance_state(PARAMS)
        task = TaskCommand(
            target_position=tuple(x[POSITION]), target_rpy=(0.0, 0.0, 0.0)
        )
        builder = QuadrupedOcpBuilder(
            params=PARAMS, gait=stance_gait(), task=task, barrier=None,
            include_inequalities=False,
        )
        grid = TimeGrid(0.0, 1.0, 0.1)
        ocp = builder.build(grid)
        u_nom = np.zeros(24)
        u_nom[[2, 5, 8, 11]] = PARAMS.mass * PARAMS.gravity / 4.0
        assert ocp.running_cost(x, u_nom, 0.5) < 1e-20
        assert ocp.terminal_cost(x) < 1e-20

    def test_doubling_weight_doubles_term(self):
        x = default_stance_state(PARAMS) + 0.1
        base = CostWeights()
        doubled = CostWeights(position=tuple(2 * np.asarray(base.position)))
        task = TaskCommand(target_position=(0.0, 0.0, 0.5))
        gait = stance_gait()
        from slqmpc.models.costs import QuadrupedCost

        pose = np.zeros(6)
        c1 = QuadrupedCost(PARAMS, gait, task, pose, base)
        c2 = QuadrupedCost(PARAMS, gait, task, pose, doubled)
        u = np.zeros(24)
        t = 0.0
        dx_pos = x[POSITION] - c1.target_state(t)[POSITION]
        extra = 0.5 * float(dx_pos @ (np.asarray(base.position) * dx_pos))
        assert_allclose(c2.running(x, u, t) - c1.running(x, u, t), extra, rtol=1e-12)

    def test_quadruped_derivative_check(self):
        builder = self.make_cost_builder()
        grid = TimeGrid(0.0, 1.0, 0.1)
        ocp = builder.build(grid)
        report = check_derivatives(ocp, samples=6, seed=0, times=grid.times[:-1])
        name, worst = report.worst()
        assert report.ok(1e-4), (name, worst)

    def test_quadruped_derivative_check_with_cones_and_gait(self):
        task = TaskCommand(target_position=(0.3, 0.0, 0.534))
        builder = QuadrupedOcpBuilder(
            params=PARAMS,
            gait=trot_gait(cycle=0.8, lead_in=0.2),
            task=task,
            barrier=BarrierConfig(mu=0.5, delta=0.1, epsilon=5.0),
        )
        grid = TimeGrid(0.0, 1.0, 0.02)
        ocp = builder.build(grid)
        report = check_derivatives(ocp, samples=6, seed=1, times=grid.times[:-1])
        name, worst = report.worst()
        assert report.ok(1e-4), (name, worst)


class TestEulerKinematics:
    def test_rate_matrix_inverts_rotation_rate(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            theta = rng.uniform(-1.0, 1.0, 3)
            omega = rng.standard_normal(3)
            E = euler_rate_matrix(theta)
            theta_dot = E @ omega
            # propagate R both ways
            eps = 1e-6
            R0 = rotation_body_to_world(theta)
            R1 = rotation_body_to_world(theta + eps * theta_dot)
            dR = (R1 - R0) / eps
            assert_allclose(dR, R0 @ skew(omega), atol=1e-5)
