"""Small verification models with closed-form solutions for solver oracles."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..barrier import BarrierConfig, ConeSpec
from ..ocp import CostQuadratic, OcpDefinition


def replace_dynamics(ocp: OcpDefinition, dynamics) -> OcpDefinition:
    """Swap the dynamics callback (Jacobians unchanged: affine drifts only)."""
    return replace(ocp, dynamics=dynamics)


def lti_ocp(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    Qf: np.ndarray,
    x_target: np.ndarray | None = None,
) -> OcpDefinition:
    """Linear dynamics with a quadratic cost around an optional state target."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    nx, nu = B.shape
    xt = np.zeros(nx) if x_target is None else np.asarray(x_target, dtype=float)
    P = np.zeros((nu, nx))

    def running(x, u, t):
        dx = x - xt
        return 0.5 * float(dx @ Q @ dx) + 0.5 * float(u @ R @ u)

    def running_quad(x, u, t):
        dx = x - xt
        return CostQuadratic(
            q0=running(x, u, t), q=Q @ dx, r=R @ u, Q=Q.copy(), R=R.copy(), P=P
        )

    def terminal(x):
        dx = x - xt
        return 0.5 * float(dx @ Qf @ dx)

    return OcpDefinition(
        nx=nx,
        nu=nu,
        dynamics=lambda x, u, t: A @ x + B @ u,
        dynamics_jacobians=lambda x, u, t: (A, B),
        running_cost=running,
        running_cost_quadratic=running_quad,
        terminal_cost=terminal,
        terminal_cost_quadratic=lambda x: (terminal(x), Qf @ (x - xt), Qf.copy()),
    )


def double_integrator_ocp(
    target: np.ndarray,
    q_pos: float = 10.0,
    q_vel: float = 1.0,
    r_input: float = 0.1,
    terminal_scale: float = 10.0,
    cone: ConeSpec | None = None,
    barrier: BarrierConfig | None = None,
    gravity: float = 0.0,
) -> OcpDefinition:
    """Planar point mass xddot = u - (0, gravity), reaching a position target.

    State (px, pz, vx, vz), input (ax, az). With ``cone`` set, the input must
    stay inside the thrust cone mu_c*az >= sqrt(ax^2 + eps^2), mirroring a
    contact-force cone on the acceleration command; a nonzero ``gravity``
    keeps vertical braking feasible under that cone (az may stay positive
    while the net acceleration is downward).
    """
    A = np.zeros((4, 4))
    A[0, 2] = A[1, 3] = 1.0
    B = np.zeros((4, 2))
    B[2, 0] = B[3, 1] = 1.0
    Q = np.diag([q_pos, q_pos, q_vel, q_vel])
    R = np.diag([r_input, r_input])
    Qf = terminal_scale * Q
    xt = np.zeros(4)
    xt[:2] = np.asarray(target, dtype=float)

    ocp = lti_ocp(A, B, Q, R, Qf, x_target=xt)
    if gravity != 0.0:
        drift = np.array([0.0, 0.0, 0.0, -gravity])
        ocp = replace_dynamics(ocp, lambda x, u, t: A @ x + B @ u + drift)
    if cone is None:
        return ocp

    eps = barrier.epsilon if barrier is not None else 0.1
    mu_c = cone.mu_c

    def inequalities(x, u, t):
        s = np.sqrt(u[0] ** 2 + eps**2)
        return np.array([mu_c * u[1] - s])

    def inequality_derivatives(x, u, t):
        s = np.sqrt(u[0] ** 2 + eps**2)
        values = np.array([mu_c * u[1] - s])
        grads = np.zeros((1, 6))
        grads[0, 4] = -u[0] / s
        grads[0, 5] = mu_c
        hessians = np.zeros((1, 6, 6))
        hessians[0, 4, 4] = -(1.0 - u[0] ** 2 / s**2) / s
        return values, grads, hessians

    return OcpDefinition(
        nx=ocp.nx,
        nu=ocp.nu,
        dynamics=ocp.dynamics,
        dynamics_jacobians=ocp.dynamics_jacobians,
        running_cost=ocp.running_cost,
        running_cost_quadratic=ocp.running_cost_quadratic,
        terminal_cost=ocp.terminal_cost,
        terminal_cost_quadratic=ocp.terminal_cost_quadratic,
        inequalities=inequalities,
        inequality_derivatives=inequality_derivatives,
        barrier=barrier if barrier is not None else BarrierConfig(epsilon=eps),
    )
