"""Diagonal tracking costs for base pose/velocity and input regularization.

Forces are regularized toward an even quarter-weight vertical distribution on
the stance legs and joint velocities toward zero; state weights pull the base
toward the commanded pose with zero rates and the joints toward the default
posture.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ocp import CostQuadratic
from .gait import GaitSchedule
from .quadruped import (
    FORCES,
    JOINTS,
    NU,
    NX,
    OMEGA,
    POSITION,
    RobotParams,
    THETA,
    VELOCITY,
    force_slice,
)


@dataclass(frozen=True)
class TaskCommand:
    """Base pose target, activated at ``command_time``.

    Before the command the initial pose is held; with a nonzero
    ``ramp_duration`` the target pose is reached by linear interpolation from
    the initial pose over that window, emulating a bounded-rate operator
    command instead of a position step.
    """

    target_position: tuple[float, float, float]
    target_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    command_time: float = 0.0
    ramp_duration: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            [np.asarray(self.target_rpy, float), np.asarray(self.target_position, float)]
        )

    def pose_at(self, t: float, initial_pose: np.ndarray) -> np.ndarray:
        if t < self.command_time:
            return initial_pose
        if self.ramp_duration <= 0.0 or t >= self.command_time + self.ramp_duration:
            return self.as_array()
        frac = (t - self.command_time) / self.ramp_duration
        return (1.0 - frac) * initial_pose + frac * self.as_array()


@dataclass(frozen=True)
class CostWeights:
    """Diagonal weights; units follow the state/input units squared."""

    orientation: tuple[float, float, float] = (200.0, 200.0, 200.0)
    position: tuple[float, float, float] = (400.0, 400.0, 400.0)
    # rate weights against the force weight set first-order feedback loops
    # whose bandwidth is Q_rate * lever^2 / (inertia^2 * R_force); keep them
    # small or the Riccati flow stiffens beyond the fixed integrator step
    angular_rate: tuple[float, float, float] = (0.5, 0.5, 0.5)
    velocity: tuple[float, float, float] = (10.0, 10.0, 10.0)
    joint_posture: float = 2.0
    force: float = 5e-3
    joint_velocity: float = 0.1
    terminal_scale: float = 1.0

    def state_diagonal(self) -> np.ndarray:
        w = np.empty(NX)
        w[THETA] = self.orientation
        w[POSITION] = self.position
        w[OMEGA] = self.angular_rate
        w[VELOCITY] = self.velocity
        w[JOINTS] = self.joint_posture
        return w

    def input_diagonal(self) -> np.ndarray:
        w = np.empty(NU)
        w[FORCES] = self.force
        w[12:] = self.joint_velocity
        return w


@dataclass(frozen=True)
class QuadrupedCost:
    """Quadratic tracking cost with gait-dependent nominal inputs."""

    params: RobotParams
    gait: GaitSchedule
    task: TaskCommand
    initial_pose: np.ndarray  # (6,) rpy + position held before command_time
    weights: CostWeights = field(default_factory=CostWeights)

    def target_state(self, t: float) -> np.ndarray:
        x_ref = np.zeros(NX)
        pose = self.task.pose_at(t, np.asarray(self.initial_pose, dtype=float))
        x_ref[THETA] = pose[:3]
        x_ref[POSITION] = pose[3:]
        x_ref[JOINTS] = self.params.default_joints
        return x_ref

    def nominal_input(self, t: float) -> np.ndarray:
        """Quarter-weight vertical force on each stance leg, zero elsewhere."""
        u_ref = np.zeros(NU)
        share = self.params.mass * self.params.gravity / 4.0
        for leg in range(4):
            if self.gait.in_stance(leg, t):
                u_ref[3 * leg + 2] = share
        return u_ref

    def running(self, x: np.ndarray, u: np.ndarray, t: float) -> float:
        dx = np.asarray(x) - self.target_state(t)
        du = np.asarray(u) - self.nominal_input(t)
        wq = self.weights.state_diagonal()
        wr = self.weights.input_diagonal()
        return 0.5 * float(dx @ (wq * dx)) + 0.5 * float(du @ (wr * du))

    def running_quadratic(self, x: np.ndarray, u: np.ndarray, t: float) -> CostQuadratic:
        dx = np.asarray(x) - self.target_state(t)
        du = np.asarray(u) - self.nominal_input(t)
        wq = self.weights.state_diagonal()
        wr = self.weights.input_diagonal()
        return CostQuadratic(
            q0=0.5 * float(dx @ (wq * dx)) + 0.5 * float(du @ (wr * du)),
            q=wq * dx,
            r=wr * du,
            Q=np.diag(wq),
            R=np.diag(wr),
            P=np.zeros((NU, NX)),
        )

    def terminal(self, x: np.ndarray, t_end: float) -> float:
        dx = np.asarray(x) - self.target_state(t_end)
        wq = self.weights.terminal_scale * self.weights.state_diagonal()
        return 0.5 * float(dx @ (wq * dx))

    def terminal_quadratic(self, x: np.ndarray, t_end: float):
        dx = np.asarray(x) - self.target_state(t_end)
        wq = self.weights.terminal_scale * self.weights.state_diagonal()
        return 0.5 * float(dx @ (wq * dx)), wq * dx, np.diag(wq)
