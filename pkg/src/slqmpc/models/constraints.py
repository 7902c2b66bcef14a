"""Mode-dependent equality constraints and friction-cone inequalities.

Stance feet must keep zero world-frame velocity; swing feet must track the
swing profile's normal velocity and carry zero contact force. Foot velocity
is expressed in the body frame as v + w x r + J qdot, which is equivalent to
the world-frame condition for the stance rows and keeps those rows
independent of the base orientation.

The friction cones act on the body-frame forces of the stance legs. On flat
ground with a level nominal base the surface normal coincides with the body
z-axis, and the cone value is invariant to yaw exactly; roll and pitch are
assumed small, which keeps the constraint a pure input constraint so the
barrier only inflates the input-cost Hessian.
"""

from __future__ import annotations

import numpy as np

from ..barrier import ConeSpec, perturbed_cone
from .gait import GaitSchedule
from .quadruped import (
    JOINTS,
    NU,
    NX,
    OMEGA,
    RobotParams,
    THETA,
    VELOCITY,
    FORCES,
    JOINT_VEL,
    force_slice,
    forward_kinematics_full,
    joint_slice,
    rotation_body_to_world,
    rotation_body_to_world_derivatives,
    skew,
)

WORLD_NORMAL = np.array([0.0, 0.0, 1.0])


def constraint_dimension(contact_flags) -> int:
    """3 rows per stance leg, 1 normal-velocity + 3 force rows per swing leg."""
    return sum(3 if c else 4 for c in contact_flags)


def mode_constraints(
    x: np.ndarray,
    u: np.ndarray,
    t: float,
    gait: GaitSchedule,
    params: RobotParams,
    with_jacobians: bool = True,
):
    """Equality-constraint values g1 and Jacobians (C, D) at one sample.

    Row order per leg (LF, RF, LH, RH): stance legs contribute the three
    body-frame foot-velocity rows; swing legs contribute the world-normal
    velocity row minus the swing profile c(t), then three force rows.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    theta = x[THETA]
    omega = x[OMEGA]
    v = x[VELOCITY]
    u_joint = u[JOINT_VEL]

    feet, jacs, hess = forward_kinematics_full(x[JOINTS], params)
    R = rotation_body_to_world(theta)
    dR = rotation_body_to_world_derivatives(theta) if with_jacobians else None
    skew_omega = skew(omega)

    flags = [gait.in_stance(leg, t) for leg in range(4)]
    m = constraint_dimension(flags)
    values = np.empty(m)
    if with_jacobians:
        C = np.zeros((m, NX))
        D = np.zeros((m, NU))

    row = 0
    for leg in range(4):
        r = feet[leg]
        J = jacs[leg]
        qd = u_joint[joint_slice(leg)]
        foot_vel_body = v + skew_omega @ r + J @ qd
        qcols = slice(12 + 3 * leg, 15 + 3 * leg)

        if with_jacobians:
            # d(J qd)/dq for this leg's three joints
            dvel_dq = skew_omega @ J + hess[leg].transpose(0, 2, 1) @ qd

        if flags[leg]:
            values[row : row + 3] = foot_vel_body
            if with_jacobians:
                C[row : row + 3, OMEGA] = -skew(r)
                C[row, 9] = C[row + 1, 10] = C[row + 2, 11] = 1.0
                C[row : row + 3, qcols] = dvel_dq
                D[row : row + 3, qcols] = J
            row += 3
        else:
            profile = gait.swing_profile(leg, t)
            c_t = profile.velocity(t) if profile is not None else 0.0
            nR = R[2]  # world z-axis row of R maps body vectors to height rate
            values[row] = float(nR @ foot_vel_body) - c_t
            values[row + 1 : row + 4] = u[force_slice(leg)]
            if with_jacobians:
                C[row, THETA] = [dR[i][2] @ foot_vel_body for i in range(3)]
                C[row, OMEGA] = -nR @ skew(r)
                C[row, VELOCITY] = nR
                C[row, qcols] = nR @ dvel_dq
                D[row, qcols] = nR @ J
                fcols = force_slice(leg)
                D[row + 1, fcols.start] = 1.0
                D[row + 2, fcols.start + 1] = 1.0
                D[row + 3, fcols.start + 2] = 1.0
            row += 4

    if not with_jacobians:
        return values
    return values, C, D


def friction_constraints(
    u: np.ndarray,
    contact_flags,
    cone: ConeSpec,
    epsilon: float,
    with_derivatives: bool = True,
):
    """Perturbed-cone inequalities, one per stance leg.

    Swing legs contribute no rows: their forces are equality-pinned to zero.
    Gradients and Hessians live in the force columns of the stacked (x, u)
    direction.
    """
    u = np.asarray(u, dtype=float)
    stance_legs = [leg for leg in range(4) if contact_flags[leg]]
    m = len(stance_legs)
    values = np.empty(m)
    if with_derivatives:
        grads = np.zeros((m, NX + NU))
        hessians = np.zeros((m, NX + NU, NX + NU))
    for i, leg in enumerate(stance_legs):
        F = u[force_slice(leg)]
        h, grad, hess = perturbed_cone(F, cone, epsilon)
        values[i] = h
        if with_derivatives:
            cols = slice(NX + 3 * leg, NX + 3 * leg + 3)
            grads[i, cols] = grad
            hessians[i, cols, cols] = hess
    if with_derivatives:
        return values, grads, hessians
    return values
