"""Closed-loop simulation: plant stepping at control rate, receding-horizon
solves at a lower update rate.

The plant integrates the kinodynamic model (optionally mismatched against
the control model) with RK4 at the control rate; inputs are held constant
over a control step. Solutions are swapped in atomically at control-step
boundaries. In the default one-period latency mode the solution computed
from the state snapshot at update k becomes active at update k+1, emulating
an asynchronous solver; zero latency activates it immediately.

Execution modes between updates:
  feedback_policy      evaluate the optimized affine policy at the plant state
  feedforward_tracking interpolate the planned trajectory and add PD
                       corrections from a separately tuned tracking controller
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .models.builder import QuadrupedOcpBuilder
from .models.constraints import mode_constraints
from .models.quadruped import (
    FORCES,
    JOINTS,
    NU,
    NX,
    OMEGA,
    POSITION,
    RobotParams,
    THETA,
    VELOCITY,
    dynamics,
    force_slice,
    forward_kinematics,
    gravity_body_frame,
    rotation_body_to_world,
    skew,
)
from .ocp import TimeGrid
from .slq import SlqSettings, SlqSolution, real_time_iteration, solve

EXECUTION_MODES = ("feedback_policy", "feedforward_tracking")
LATENCY_MODES = ("one_period", "zero")
DISTURBANCE_KINDS = ("added_mass", "constant_force", "push")


@dataclass(frozen=True)
class Disturbance:
    """Plant-side disturbance active on [start, end).

    added_mass: magnitude is a fraction of the nominal mass (0.15 = +15%).
    constant_force: magnitude is a world-frame force 3-vector [N] at the CoM.
    push: magnitude is a world-frame velocity change [m/s] applied at start.
    """

    kind: str
    magnitude: tuple[float, ...] | float
    start: float = 0.0
    end: float = np.inf

    def __post_init__(self) -> None:
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.end <= self.start:
            raise ValueError("disturbance window must have end > start")


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop experiment configuration."""

    control_rate: float = 400.0
    mpc_rate: float = 20.0
    execution_mode: str = "feedback_policy"
    mass_mismatch: float = 0.0  # control-model mass is scaled by (1 + this)
    inertia_mismatch: float = 0.0
    disturbances: tuple[Disturbance, ...] = ()
    mpc_latency: str = "one_period"
    horizon: float = 1.0
    duration: float = 3.0
    seed: int = 0
    mpc_iteration_budget: int = 1

    def __post_init__(self) -> None:
        if self.execution_mode not in EXECUTION_MODES:
            raise ValueError(f"unknown execution mode {self.execution_mode!r}")
        if self.mpc_latency not in LATENCY_MODES:
            raise ValueError(f"unknown latency mode {self.mpc_latency!r}")
        if not (self.control_rate >= self.mpc_rate > 0.0):
            raise ValueError("need control_rate >= mpc_rate > 0")
        ratio = self.control_rate / self.mpc_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("control_rate must be an integer multiple of mpc_rate")

    @property
    def steps_per_update(self) -> int:
        return int(round(self.control_rate / self.mpc_rate))

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate


@dataclass(frozen=True)
class TrackingController:
    """Diagonal PD baseline closing the loop around a feedforward plan.

    Base pose/velocity errors map to a desired wrench correction distributed
    over the stance feet by the minimum-norm contact allocation; joint errors
    map to joint-velocity corrections. Zero error produces zero correction.
    """

    kp_position: float = 60.0
    kd_velocity: float = 16.0
    kp_attitude: float = 40.0
    kd_angular: float = 10.0
    kp_joint: float = 5.0

    def correction(
        self,
        x: np.ndarray,
        x_ref: np.ndarray,
        contact_flags,
        params: RobotParams,
    ) -> np.ndarray:
        theta = x[THETA]
        R = rotation_body_to_world(theta)
        pos_err = x_ref[POSITION] - x[POSITION]
        vel_err_world = R @ x_ref[VELOCITY] - R @ x[VELOCITY]
        force_world = params.mass * (
            self.kp_position * pos_err + self.kd_velocity * vel_err_world
        )
        att_err = x_ref[THETA] - x[THETA]
        omg_err = x_ref[OMEGA] - x[OMEGA]
        torque_body = params.inertia @ (
            self.kp_attitude * att_err + self.kd_angular * omg_err
        )
        wrench = np.concatenate([R.T @ force_world, torque_body])

        du = np.zeros(NU)
        stance = [leg for leg in range(4) if contact_flags[leg]]
        if stance:
            feet, _ = forward_kinematics(x[JOINTS], params)
            wrench_map = np.zeros((6, 3 * len(stance)))
            for i, leg in enumerate(stance):
                wrench_map[:3, 3 * i : 3 * i + 3] = np.eye(3)
                wrench_map[3:, 3 * i : 3 * i + 3] = skew(feet[leg])
            forces, *_ = np.linalg.lstsq(wrench_map, wrench, rcond=None)
            for i, leg in enumerate(stance):
                du[force_slice(leg)] = forces[3 * i : 3 * i + 3]
        du[12:] = self.kp_joint * (x_ref[JOINTS] - x[JOINTS])
        return du


@dataclass(frozen=True)
class SimLog:
    """Uniform control-rate record of one closed-loop run.

    Solve wall times are kept out of the serialized table so that seeded
    runs produce byte-identical logs.
    """

    control_dt: float
    times: np.ndarray          # (K,)
    states: np.ndarray         # (K, 24)
    inputs: np.ndarray         # (K, 24) commanded inputs
    desired_accel: np.ndarray  # (K, 3) world-frame CoM acceleration command
    policy_ids: np.ndarray     # (K,) active solution index
    contact_flags: np.ndarray  # (K, 4) 0/1
    cone_margins: np.ndarray   # (K, 4) unperturbed cone values, NaN in swing
    eq_violations: np.ndarray  # (K,) max |g1| of the executed pair
    update_steps: np.ndarray   # control-step indices where a policy activated
    switch_steps: np.ndarray   # control-step indices adjacent to mode changes
    solve_wall_times: np.ndarray
    solve_failures: int
    failure_reasons: tuple[tuple[float, str], ...]
    diverged: bool

    @property
    def n_steps(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class JumpStats:
    """Command discontinuities across policy-activation boundaries."""

    input_jumps: np.ndarray        # at update instants away from switches
    accel_jumps: np.ndarray
    switch_input_jumps: np.ndarray  # at mode-switch-adjacent instants
    excluded_updates: int

    @property
    def mean_input_jump(self) -> float:
        return float(np.mean(self.input_jumps)) if self.input_jumps.size else 0.0

    @property
    def max_input_jump(self) -> float:
        return float(np.max(self.input_jumps)) if self.input_jumps.size else 0.0

    @property
    def mean_accel_jump(self) -> float:
        return float(np.mean(self.accel_jumps)) if self.accel_jumps.size else 0.0

    @property
    def max_accel_jump(self) -> float:
        return float(np.max(self.accel_jumps)) if self.accel_jumps.size else 0.0

    def as_dict(self) -> dict:
        return {
            "mean_input_jump": self.mean_input_jump,
            "max_input_jump": self.max_input_jump,
            "mean_accel_jump": self.mean_accel_jump,
            "max_accel_jump": self.max_accel_jump,
            "n_updates": int(self.input_jumps.size),
            "n_excluded_near_switches": int(self.excluded_updates),
            "mean_switch_input_jump": (
                float(np.mean(self.switch_input_jumps))
                if self.switch_input_jumps.size
                else 0.0
            ),
            "max_switch_input_jump": (
                float(np.max(self.switch_input_jumps))
                if self.switch_input_jumps.size
                else 0.0
            ),
        }


@dataclass(frozen=True)
class SimScenario:
    """Everything the closed loop needs besides the SimConfig."""

    builder: QuadrupedOcpBuilder
    x0: np.ndarray
    slq_settings: SlqSettings = field(default_factory=SlqSettings)
    tracker: TrackingController = field(default_factory=TrackingController)
    initial_solve_iterations: int = 30
    mpc_grid_dt: float = 0.01


def _mismatched_params(params: RobotParams, cfg: SimConfig) -> RobotParams:
    return replace(
        params,
        mass=params.mass * (1.0 + cfg.mass_mismatch),
        inertia_diag=tuple(
            v * (1.0 + cfg.inertia_mismatch) for v in params.inertia_diag
        ),
    )


class _Plant:
    """Simulation-side model with disturbances."""

    def __init__(self, params: RobotParams, disturbances: tuple[Disturbance, ...]):
        self.params = params
        self.disturbances = disturbances

    def added_mass_fraction(self, t: float) -> float:
        extra = 0.0
        for d in self.disturbances:
            if d.kind == "added_mass" and d.start <= t < d.end:
                extra += float(d.magnitude)
        return extra

    def external_force(self, t: float) -> np.ndarray:
        f = np.zeros(3)
        for d in self.disturbances:
            if d.kind == "constant_force" and d.start <= t < d.end:
                f += np.asarray(d.magnitude, dtype=float)
        return f

    def derivative(self, x: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
        xdot = dynamics(x, u, self.params)
        extra = self.added_mass_fraction(t)
        f_ext = self.external_force(t)
        if extra != 0.0 or np.any(f_ext):
            theta = x[THETA]
            forces = u[FORCES].reshape(4, 3).sum(axis=0)
            m_eff = self.params.mass * (1.0 + extra)
            f_body = rotation_body_to_world(theta).T @ f_ext
            xdot = xdot.copy()
            xdot[VELOCITY] = (
                gravity_body_frame(theta, self.params) + (forces + f_body) / m_eff
            )
        return xdot

    def step(self, x: np.ndarray, u: np.ndarray, t: float, dt: float) -> np.ndarray:
        k1 = self.derivative(x, u, t)
        k2 = self.derivative(x + 0.5 * dt * k1, u, t + 0.5 * dt)
        k3 = self.derivative(x + 0.5 * dt * k2, u, t + 0.5 * dt)
        k4 = self.derivative(x + dt * k3, u, t + dt)
        x_next = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        for d in self.disturbances:
            if d.kind == "push" and t <= d.start < t + dt:
                theta = x_next[THETA]
                x_next = x_next.copy()
                x_next[VELOCITY] += rotation_body_to_world(theta).T @ np.asarray(
                    d.magnitude, dtype=float
                )
        return x_next


def _clamped_policy_time(solution: SlqSolution, t: float) -> float:
    grid = solution.policy.grid
    return min(max(t, grid.t0), grid.t_end)


def run_closed_loop(scenario: SimScenario, cfg: SimConfig) -> SimLog:
    """Simulate the plant under receding-horizon control.

    The control model (used by every solve) may differ from the plant by the
    configured mass/inertia mismatch; plant-side disturbances act on top.
    MPC failures keep the previous solution active and are counted; a
    non-finite plant state terminates the run gracefully with the log marked
    diverged.
    """
    control_builder = replace(
        scenario.builder,
        params=_mismatched_params(scenario.builder.params, cfg),
    )
    plant = _Plant(scenario.builder.params, cfg.disturbances)
    tracker = scenario.tracker
    settings = scenario.slq_settings
    dt = cfg.control_dt
    grid_dt = scenario.mpc_grid_dt
    n_steps = int(round(cfg.duration * cfg.control_rate))
    steps_per_update = cfg.steps_per_update
    gait = scenario.builder.gait

    failure_log: list[tuple[float, str]] = []
    stance_gains: dict[str, np.ndarray] = {}

    def stabilizing_gains(x: np.ndarray) -> np.ndarray:
        """Full-stance LQR gains used to bootstrap solves from scratch."""
        if "K" not in stance_gains:
            from .models.gait import stance_gait

            stance_builder = replace(control_builder, gait=stance_gait())
            grid = TimeGrid(t0=0.0, duration=cfg.horizon, dt=grid_dt)
            sol = solve(
                stance_builder.build(grid),
                x,
                stance_builder.nominal_policy(grid, x),
                replace(settings, max_iterations=scenario.initial_solve_iterations),
            )
            stance_gains["K"] = sol.policy.gains[0]
        return stance_gains["K"]

    def solve_from(t0: float, x: np.ndarray, warm: Optional[SlqSolution]):
        grid = TimeGrid(t0=t0, duration=cfg.horizon, dt=grid_dt)
        ocp = control_builder.build(grid)
        started = time.perf_counter()
        try:
            if warm is not None:
                sol = real_time_iteration(
                    ocp, x, t0, warm, settings, budget=cfg.mpc_iteration_budget
                )
            else:
                # from-scratch solves start from gait-consistent inputs held
                # together by full-stance gains so the first rollout stays
                # upright through the swing phases
                init = control_builder.nominal_policy(grid, x, gains=stabilizing_gains(x))
                sol = solve(
                    ocp, x, init,
                    replace(settings, max_iterations=scenario.initial_solve_iterations),
                )
            return sol, time.perf_counter() - started, True
        except (ValueError, FloatingPointError) as exc:
            failure_log.append((t0, f"{type(exc).__name__}: {exc}"))
            if warm is not None:
                # stale or incompatible warm start: recover with a fresh solve
                return solve_from(t0, x, None)
            return None, time.perf_counter() - started, False

    times = np.arange(n_steps) * dt
    states = np.zeros((n_steps, NX))
    inputs = np.zeros((n_steps, NU))
    desired_accel = np.zeros((n_steps, 3))
    policy_ids = np.zeros(n_steps, dtype=int)
    contact = np.zeros((n_steps, 4), dtype=int)
    cone_margins = np.full((n_steps, 4), np.nan)
    eq_violations = np.zeros(n_steps)
    update_steps: list[int] = []
    wall_times: list[float] = []
    failures = 0
    diverged = False

    x = scenario.x0.copy()
    active, wt, ok = solve_from(0.0, x, None)
    if not ok or active is None:
        raise RuntimeError("initial MPC solve failed; scenario is not startable")
    wall_times.append(wt)
    active_id = 0
    pending: Optional[SlqSolution] = None
    if cfg.mpc_latency == "one_period":
        pending, wt, ok = solve_from(0.0, x, active)
        wall_times.append(wt)
        if not ok:
            failures += 1
            pending = None

    mu_c = scenario.builder.cone.mu_c
    m_control = control_builder.params.mass

    step = 0
    while step < n_steps:
        t = float(times[step])
        if step > 0 and step % steps_per_update == 0:
            if cfg.mpc_latency == "one_period":
                if pending is not None:
                    active = pending
                    active_id += 1
                    update_steps.append(step)
                pending, wt, ok = solve_from(t, x, active)
                wall_times.append(wt)
                if not ok:
                    failures += 1
                    pending = None
            else:
                new_solution, wt, ok = solve_from(t, x, active)
                wall_times.append(wt)
                if ok and new_solution is not None:
                    active = new_solution
                    active_id += 1
                    update_steps.append(step)
                else:
                    failures += 1

        tq = _clamped_policy_time(active, t)
        if cfg.execution_mode == "feedback_policy":
            u = active.policy.evaluate(x, tq)
        else:
            x_ref = active.policy.x_star.at(tq)
            u_ff = active.policy.u_star.at(tq)
            flags_ref = gait.contact_flags(t)
            u = u_ff + tracker.correction(x, x_ref, flags_ref, plant.params)

        flags = gait.contact_flags(t)
        states[step] = x
        inputs[step] = u
        policy_ids[step] = active_id
        contact[step] = flags
        # desired CoM acceleration per the control model under the command
        theta = x[THETA]
        accel_body = gravity_body_frame(theta, control_builder.params) + (
            u[FORCES].reshape(4, 3).sum(axis=0) / m_control
        )
        desired_accel[step] = rotation_body_to_world(theta) @ accel_body
        for leg in range(4):
            if flags[leg]:
                f = u[force_slice(leg)]
                cone_margins[step, leg] = mu_c * f[2] - np.hypot(f[0], f[1])
        try:
            g1 = mode_constraints(
                x, u, t, scenario.builder.gait, plant.params, with_jacobians=False
            )
            eq_violations[step] = float(np.max(np.abs(g1))) if g1.size else 0.0
        except ValueError:
            eq_violations[step] = np.nan

        try:
            x_next = plant.step(x, u, t, dt)
        except (ValueError, FloatingPointError):
            x_next = None
        if (
            x_next is None
            or not np.all(np.isfinite(x_next))
            or np.max(np.abs(x_next)) > 1e6
        ):
            diverged = True
            step += 1
            break
        x = x_next
        step += 1

    k = step
    switch = _switch_adjacent_steps(gait, times[:k], steps_per_update)
    return SimLog(
        control_dt=dt,
        times=times[:k],
        states=states[:k],
        inputs=inputs[:k],
        desired_accel=desired_accel[:k],
        policy_ids=policy_ids[:k],
        contact_flags=contact[:k],
        cone_margins=cone_margins[:k],
        eq_violations=eq_violations[:k],
        update_steps=np.asarray(update_steps, dtype=int),
        switch_steps=switch,
        solve_wall_times=np.asarray(wall_times),
        solve_failures=failures,
        failure_reasons=tuple(failure_log),
        diverged=diverged,
    )


def _switch_adjacent_steps(gait, times: np.ndarray, window: int = 1) -> np.ndarray:
    """Control-step indices within one step of a gait mode change."""
    if times.size == 0:
        return np.zeros(0, dtype=int)
    dt = times[1] - times[0] if times.size > 1 else 1.0
    events = gait.switch_times(times[0] - dt, times[-1] + dt)
    steps: set[int] = set()
    for ev in events:
        idx = int(round((ev - times[0]) / dt))
        for d in range(-window, window + 1):
            if 0 <= idx + d < times.size:
                steps.add(idx + d)
    return np.asarray(sorted(steps), dtype=int)


def discontinuity_metric(log: SimLog, exclude_window: int = 1) -> JumpStats:
    """Command jumps across policy activations, split by switch adjacency.

    For each activation step k the jump is ||u_k - u_{k-1}|| (and likewise
    for the desired CoM acceleration). Activations within ``exclude_window``
    control steps of a contact switch are reported separately, since the
    planned input is discontinuous there by construction.
    """
    if log.n_steps == 0:
        raise ValueError("empty simulation log")
    switch_set = set(
        int(s + d)
        for s in log.switch_steps
        for d in range(-exclude_window, exclude_window + 1)
    )
    jumps, accels, switch_jumps = [], [], []
    excluded = 0
    for k in log.update_steps:
        if k <= 0 or k >= log.n_steps:
            continue
        du = float(np.linalg.norm(log.inputs[k] - log.inputs[k - 1]))
        da = float(np.linalg.norm(log.desired_accel[k] - log.desired_accel[k - 1]))
        if int(k) in switch_set:
            excluded += 1
            switch_jumps.append(du)
        else:
            jumps.append(du)
            accels.append(da)
    return JumpStats(
        input_jumps=np.asarray(jumps),
        accel_jumps=np.asarray(accels),
        switch_input_jumps=np.asarray(switch_jumps),
        excluded_updates=excluded,
    )


def step_to_step_jumps(log: SimLog) -> tuple[np.ndarray, np.ndarray]:
    """Per-step input-change norms and a mask of switch-adjacent steps.

    Used for the continuous-update baseline, where every control step is an
    update instant and the question is where the discontinuities concentrate.
    """
    du = np.linalg.norm(np.diff(log.inputs, axis=0), axis=1)
    mask = np.zeros(log.n_steps - 1, dtype=bool)
    for s in log.switch_steps:
        for d in (-1, 0, 1):
            idx = int(s + d) - 1
            if 0 <= idx < mask.size:
                mask[idx] = True
    return du, mask


def constant_disturbance_experiment(
    scenario: SimScenario,
    cfg: SimConfig,
    mass_fraction: float = 0.15,
    settle_time: float = 1.0,
) -> tuple[SimLog, SimLog]:
    """Standing disturbance-rejection comparison of both execution modes.

    An added CoM mass (default 15% of the nominal) lands on the plant after
    ``settle_time``; the same seed and schedule run once with the
    feedforward-plus-tracker baseline and once with the feedback policy.
    """
    disturbance = Disturbance(
        kind="added_mass", magnitude=mass_fraction, start=settle_time
    )
    base = replace(cfg, disturbances=cfg.disturbances + (disturbance,))
    log_ff = run_closed_loop(
        scenario, replace(base, execution_mode="feedforward_tracking")
    )
    log_fb = run_closed_loop(scenario, replace(base, execution_mode="feedback_policy"))
    return log_ff, log_fb
