"""Assembles the quadruped optimal-control problem for a given horizon grid.

Mode changes are snapped to the grid's node lattice before any callback sees
them, so constraint dimensions never change inside an integration interval.
Because MPC horizons shift in time, a builder is constructed once per task
and produces a fresh OcpDefinition per grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..barrier import BarrierConfig, ConeSpec
from ..ocp import OcpDefinition, TimeGrid
from .constraints import friction_constraints, mode_constraints
from .costs import CostWeights, QuadrupedCost, TaskCommand
from .gait import GaitSchedule
from .quadruped import (
    JOINTS,
    NU,
    NX,
    POSITION,
    RobotParams,
    THETA,
    default_stance_state,
    dynamics,
    dynamics_jacobians,
)


def snap_gait_to_lattice(
    gait: GaitSchedule, t0: float, dt: float, t_end: float
) -> GaitSchedule:
    """Aperiodic copy of a gait with swing windows snapped to the node lattice.

    Window endpoints are rounded to the nearest lattice time t0 + k*dt
    (including times outside [t0, t_end], which stay consistent across
    shifted MPC horizons sharing the lattice). Windows that collapse to zero
    length are dropped.
    """
    def snap(t: float) -> float:
        return t0 + round((t - t0) / dt) * dt

    margin = (gait.cycle or 0.0) + 2.0 * dt
    windows = []
    for leg in range(4):
        leg_windows = []
        for a, b in gait.absolute_windows(leg, t0 - margin, t_end + margin):
            a_s, b_s = snap(a), snap(b)
            if b_s > a_s:
                leg_windows.append((a_s, b_s))
        windows.append(tuple(leg_windows))
    return GaitSchedule(
        name=gait.name,
        swing_windows=tuple(windows),
        cycle=None,
        swing_height=gait.swing_height,
    )


@dataclass(frozen=True)
class QuadrupedOcpBuilder:
    """Bundles robot, gait, task and constraint configuration.

    ``build(grid)`` returns the OcpDefinition for that horizon; barrier=None
    or include_inequalities=False turns the friction cones off.
    """

    params: RobotParams = field(default_factory=RobotParams)
    gait: GaitSchedule = None  # type: ignore[assignment]
    task: TaskCommand = None  # type: ignore[assignment]
    weights: CostWeights = field(default_factory=CostWeights)
    cone: ConeSpec = field(default_factory=ConeSpec)
    barrier: Optional[BarrierConfig] = field(default_factory=BarrierConfig)
    include_inequalities: bool = True
    initial_pose: Optional[tuple[float, ...]] = None

    def default_state(self) -> np.ndarray:
        return default_stance_state(self.params)

    def resolved_initial_pose(self) -> np.ndarray:
        if self.initial_pose is not None:
            return np.asarray(self.initial_pose, dtype=float)
        x0 = self.default_state()
        return np.concatenate([x0[THETA], x0[POSITION]])

    def nominal_policy(
        self,
        grid: TimeGrid,
        x_ref: Optional[np.ndarray] = None,
        gains: Optional[np.ndarray] = None,
    ):
        """Policy with gait-consistent weight-sharing inputs.

        Stance legs balance the weight (forces and torques) at every node
        and swing legs carry no force, so the initial rollout starts close
        to the equality constraints of the schedule. Optional ``gains`` (a
        single nu x nx matrix or per-node stack) stabilize the rollout; a
        gait with flight-like support phases tips an uncontrolled body far
        enough to poison the first linearization.
        """
        from ..ocp import AffinePolicy, Trajectory
        from .quadruped import nominal_stance_input

        snapped = snap_gait_to_lattice(self.gait, grid.t0, grid.dt, grid.t_end)
        x_ref = self.default_state() if x_ref is None else np.asarray(x_ref, float)
        n = grid.n_nodes
        us = np.empty((n, NU))
        for k, t in enumerate(grid.times):
            us[k] = nominal_stance_input(self.params, snapped.contact_flags(t))
        if gains is None:
            gain_stack = np.zeros((n, NU, NX))
        elif gains.ndim == 2:
            gain_stack = np.tile(gains, (n, 1, 1))
        else:
            gain_stack = gains
        return AffinePolicy(
            grid=grid,
            x_star=Trajectory(grid, np.tile(x_ref, (n, 1))),
            u_star=Trajectory(grid, us),
            gains=gain_stack,
        )

    def build(self, grid: TimeGrid) -> OcpDefinition:
        params = self.params
        snapped = snap_gait_to_lattice(self.gait, grid.t0, grid.dt, grid.t_end)
        cost = QuadrupedCost(
            params=params,
            gait=snapped,
            task=self.task,
            initial_pose=self.resolved_initial_pose(),
            weights=self.weights,
        )
        t_end = grid.t_end
        cone = self.cone
        epsilon = self.barrier.epsilon if self.barrier is not None else 1e-6
        use_cones = self.include_inequalities and self.barrier is not None

        def state_sampler(rng: np.random.Generator) -> np.ndarray:
            x = self.default_state().copy()
            x[THETA] += rng.uniform(-0.2, 0.2, 3)
            x[POSITION] += rng.uniform(-0.3, 0.3, 3)
            x[6:12] += rng.uniform(-1.0, 1.0, 6)
            x[JOINTS] += rng.uniform(-0.4, 0.4, 12)
            return x

        def input_sampler(rng: np.random.Generator) -> np.ndarray:
            u = np.empty(NU)
            u[:12] = rng.normal(0.0, 50.0, 12)
            u[12:] = rng.normal(0.0, 2.0, 12)
            return u

        return OcpDefinition(
            nx=NX,
            nu=NU,
            dynamics=lambda x, u, t: dynamics(x, u, params),
            dynamics_jacobians=lambda x, u, t: dynamics_jacobians(x, u, params),
            running_cost=cost.running,
            running_cost_quadratic=cost.running_quadratic,
            terminal_cost=lambda x: cost.terminal(x, t_end),
            terminal_cost_quadratic=lambda x: cost.terminal_quadratic(x, t_end),
            eq_constraints=lambda x, u, t: mode_constraints(
                x, u, t, snapped, params, with_jacobians=False
            ),
            eq_constraint_jacobians=lambda x, u, t: mode_constraints(
                x, u, t, snapped, params, with_jacobians=True
            )[1:],
            inequalities=(
                (lambda x, u, t: friction_constraints(
                    u, snapped.contact_flags(t), cone, epsilon, with_derivatives=False
                )) if use_cones else None
            ),
            inequality_derivatives=(
                (lambda x, u, t: friction_constraints(
                    u, snapped.contact_flags(t), cone, epsilon, with_derivatives=True
                )) if use_cones else None
            ),
            barrier=self.barrier if use_cones else None,
            mode_schedule=snapped.mode_schedule(grid),
            state_sampler=state_sampler,
            input_sampler=input_sampler,
        )
