"""Kinodynamic quadruped model: single free-floating body plus 3-DoF legs.

State (24): base Euler angles (roll, pitch, yaw; ZYX convention), CoM world
position, base-frame angular rate, base-frame CoM linear velocity, and 12
joint angles. Input (24): per-leg contact forces in the body frame followed
by 12 joint velocity commands. Legs are ordered LF, RF, LH, RH with joints
HAA, HFE, KFE.

All derivatives are analytic; inertia is constant and taken about the CoM at
the default configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

LEG_NAMES = ("LF", "RF", "LH", "RH")
JOINT_NAMES = ("HAA", "HFE", "KFE")
NX = 24
NU = 24

# state layout
THETA = slice(0, 3)
POSITION = slice(3, 6)
OMEGA = slice(6, 9)
VELOCITY = slice(9, 12)
JOINTS = slice(12, 24)
# input layout
FORCES = slice(0, 12)
JOINT_VEL = slice(12, 24)

STATE_LABELS = (
    "roll", "pitch", "yaw",
    "p_x", "p_y", "p_z",
    "w_x", "w_y", "w_z",
    "v_x", "v_y", "v_z",
) + tuple(f"q_{leg}_{joint}" for leg in LEG_NAMES for joint in JOINT_NAMES)

INPUT_LABELS = tuple(
    f"F_{leg}_{axis}" for leg in LEG_NAMES for axis in ("x", "y", "z")
) + tuple(f"qd_{leg}_{joint}" for leg in LEG_NAMES for joint in JOINT_NAMES)


def force_slice(leg: int) -> slice:
    return slice(3 * leg, 3 * leg + 3)


def joint_slice(leg: int) -> slice:
    return slice(3 * leg, 3 * leg + 3)


@dataclass(frozen=True)
class RobotParams:
    """Geometry and inertial parameters of a desk-scale quadruped.

    Defaults approximate a ~36 kg machine; they are config-driven and not
    claimed to match any particular hardware.
    """

    mass: float = 36.0
    inertia_diag: tuple[float, float, float] = (1.0, 2.5, 2.8)
    hip_offsets: tuple[tuple[float, float, float], ...] = (
        (0.3, 0.2, 0.0),
        (0.3, -0.2, 0.0),
        (-0.3, 0.2, 0.0),
        (-0.3, -0.2, 0.0),
    )
    link_lengths: tuple[float, float] = (0.25, 0.33)
    # crouched enough that a full step keeps the legs away from the
    # straight-knee singularity
    default_joint_angles: tuple[float, ...] = (
        0.0, 0.6, -1.2,   # LF
        0.0, 0.6, -1.2,   # RF
        0.0, -0.6, 1.2,   # LH
        0.0, -0.6, 1.2,   # RH
    )
    gravity: float = 9.81
    max_pitch: float = 1.4

    def __post_init__(self) -> None:
        if not (self.mass > 0.0):
            raise ValueError("mass must be positive")
        if any(v <= 0.0 for v in self.inertia_diag):
            raise ValueError("inertia diagonal must be positive")
        if len(self.hip_offsets) != 4 or len(self.default_joint_angles) != 12:
            raise ValueError("expected 4 hip offsets and 12 default joint angles")

    @property
    def inertia(self) -> np.ndarray:
        return np.diag(self.inertia_diag)

    @property
    def hips_array(self) -> np.ndarray:
        if "_hips" not in self.__dict__:
            object.__setattr__(self, "_hips", np.asarray(self.hip_offsets, dtype=float))
        return self.__dict__["_hips"]

    @property
    def inertia_array(self) -> np.ndarray:
        if "_inertia" not in self.__dict__:
            object.__setattr__(
                self, "_inertia", np.asarray(self.inertia_diag, dtype=float)
            )
        return self.__dict__["_inertia"]

    @property
    def inertia_inv(self) -> np.ndarray:
        return np.diag(1.0 / np.asarray(self.inertia_diag))

    @property
    def default_joints(self) -> np.ndarray:
        return np.asarray(self.default_joint_angles, dtype=float)

    @property
    def hips(self) -> np.ndarray:
        return np.asarray(self.hip_offsets, dtype=float)


@dataclass(frozen=True)
class KinodynamicState:
    """Named view of the 24-dim state vector."""

    theta: np.ndarray      # base Euler angles (roll, pitch, yaw) [rad]
    position: np.ndarray   # CoM position, world frame [m]
    omega: np.ndarray      # base angular rate, base frame [rad/s]
    velocity: np.ndarray   # CoM linear velocity, base frame [m/s]
    joints: np.ndarray     # 12 joint angles [rad]

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.theta, self.position, self.omega, self.velocity, self.joints]
        )

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "KinodynamicState":
        x = np.asarray(x, dtype=float)
        return cls(x[THETA], x[POSITION], x[OMEGA], x[VELOCITY], x[JOINTS])


@dataclass(frozen=True)
class KinodynamicInput:
    """Named view of the 24-dim input vector."""

    forces: np.ndarray      # 4x3 contact forces, body frame [N]
    joint_velocities: np.ndarray  # 12 joint velocity commands [rad/s]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.forces.reshape(-1), self.joint_velocities])

    @classmethod
    def from_vector(cls, u: np.ndarray) -> "KinodynamicInput":
        u = np.asarray(u, dtype=float)
        return cls(u[FORCES].reshape(4, 3), u[JOINT_VEL])


# ---------------------------------------------------------------------------
# Rotations (ZYX Euler: R = Rz(yaw) Ry(pitch) Rx(roll))


def _rx(q: float) -> np.ndarray:
    c, s = np.cos(q), np.sin(q)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(q: float) -> np.ndarray:
    c, s = np.cos(q), np.sin(q)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(q: float) -> np.ndarray:
    c, s = np.cos(q), np.sin(q)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _drx(q: float) -> np.ndarray:
    c, s = np.cos(q), np.sin(q)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _dry(q: float) -> np.ndarray:
    c, s = np.cos(q), np.sin(q)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drz(q: float) -> np.ndarray:
    c, s = np.cos(q), np.sin(q)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def _ddrx(q: float) -> np.ndarray:
    c, s = np.cos(q), np.sin(q)
    return np.array([[0.0, 0.0, 0.0], [0.0, -c, s], [0.0, -s, -c]])


def _ddry(q: float) -> np.ndarray:
    c, s = np.cos(q), np.sin(q)
    return np.array([[-c, 0.0, -s], [0.0, 0.0, 0.0], [s, 0.0, -c]])


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_body_to_world(theta: np.ndarray) -> np.ndarray:
    roll, pitch, yaw = theta
    return _rz(yaw) @ _ry(pitch) @ _rx(roll)


def rotation_body_to_world_derivatives(theta: np.ndarray) -> np.ndarray:
    """dR/dtheta_i stacked as (3, 3, 3), index 0 over (roll, pitch, yaw)."""
    roll, pitch, yaw = theta
    Rx, Ry, Rz = _rx(roll), _ry(pitch), _rz(yaw)
    return np.stack([Rz @ Ry @ _drx(roll), Rz @ _dry(pitch) @ Rx, _drz(yaw) @ Ry @ Rx])


def euler_rate_matrix(theta: np.ndarray, max_pitch: float = 1.4) -> np.ndarray:
    """Map body angular rate to (roll, pitch, yaw) Euler-angle rates."""
    roll, pitch, _ = theta
    if abs(pitch) > max_pitch:
        raise ValueError(
            f"pitch {pitch:.3f} rad too close to the Euler singularity at pi/2"
        )
    sr, cr = np.sin(roll), np.cos(roll)
    tp = np.tan(pitch)
    cp = np.cos(pitch)
    return np.array(
        [
            [1.0, sr * tp, cr * tp],
            [0.0, cr, -sr],
            [0.0, sr / cp, cr / cp],
        ]
    )


def euler_rate_matrix_derivatives(theta: np.ndarray) -> np.ndarray:
    """dE/dtheta_i stacked as (3, 3, 3); E never depends on yaw."""
    roll, pitch, _ = theta
    sr, cr = np.sin(roll), np.cos(roll)
    sp, cp = np.sin(pitch), np.cos(pitch)
    tp = sp / cp
    dE = np.zeros((3, 3, 3))
    dE[0] = [
        [0.0, cr * tp, -sr * tp],
        [0.0, -sr, -cr],
        [0.0, cr / cp, -sr / cp],
    ]
    dE[1] = [
        [0.0, sr / cp**2, cr / cp**2],
        [0.0, 0.0, 0.0],
        [0.0, sr * sp / cp**2, cr * sp / cp**2],
    ]
    return dE


# ---------------------------------------------------------------------------
# Leg kinematics


def leg_forward_kinematics(q: np.ndarray, hip: np.ndarray, lengths: tuple[float, float]):
    """Foot position (body frame), 3x3 Jacobian and 3x3x3 Hessian of one leg.

    The chain is HAA about x at the hip, then HFE and KFE about y:
    r = hip + Rx(q1) (Ry(q2) a + Ry(q2+q3) b) with a, b along -z.
    """
    positions, jacobians, hessians = _fk_batch(
        np.asarray(q, dtype=float)[None, :], np.asarray(hip, dtype=float)[None, :], lengths
    )
    return positions[0], jacobians[0], hessians[0]


@numba.njit(cache=True)
def _fk_batch(q: np.ndarray, hips: np.ndarray, l1: float, l2: float, want_hess: bool):
    """Closed-form leg kinematics for a (n, 3) batch of joint triples.

    With s = Ry(q2) a + Ry(q2+q3) b and a, b along -z, the chain reduces to
    r = hip + (sx, -sin(q1) sz, cos(q1) sz); all derivatives follow in
    closed form, which keeps the dynamics hot path free of small-matrix
    products.
    """
    n = q.shape[0]
    r = np.empty((n, 3))
    jac = np.zeros((n, 3, 3))
    hess = np.zeros((n, 3, 3, 3))
    for i in range(n):
        q1 = q[i, 0]
        q2 = q[i, 1]
        q23 = q[i, 1] + q[i, 2]
        s1, c1 = np.sin(q1), np.cos(q1)
        s2, c2 = np.sin(q2), np.cos(q2)
        s23, c23 = np.sin(q23), np.cos(q23)

        sx = -l1 * s2 - l2 * s23
        sz = -l1 * c2 - l2 * c23
        dsx2 = -l1 * c2 - l2 * c23
        dsz2 = l1 * s2 + l2 * s23
        dsx3 = -l2 * c23
        dsz3 = l2 * s23

        r[i, 0] = hips[i, 0] + sx
        r[i, 1] = hips[i, 1] - s1 * sz
        r[i, 2] = hips[i, 2] + c1 * sz

        jac[i, 0, 1] = dsx2
        jac[i, 0, 2] = dsx3
        jac[i, 1, 0] = -c1 * sz
        jac[i, 1, 1] = -s1 * dsz2
        jac[i, 1, 2] = -s1 * dsz3
        jac[i, 2, 0] = -s1 * sz
        jac[i, 2, 1] = c1 * dsz2
        jac[i, 2, 2] = c1 * dsz3

        if want_hess:
            # second derivatives of (sx, sz)
            ddsx22 = l1 * s2 + l2 * s23
            ddsz22 = l1 * c2 + l2 * c23
            ddsx23 = l2 * s23
            ddsz23 = l2 * c23
            hess[i, 0, 1, 1] = ddsx22
            hess[i, 0, 1, 2] = hess[i, 0, 2, 1] = hess[i, 0, 2, 2] = ddsx23
            hess[i, 1, 0, 0] = s1 * sz
            hess[i, 2, 0, 0] = -c1 * sz
            hess[i, 1, 0, 1] = hess[i, 1, 1, 0] = -c1 * dsz2
            hess[i, 2, 0, 1] = hess[i, 2, 1, 0] = -s1 * dsz2
            hess[i, 1, 0, 2] = hess[i, 1, 2, 0] = -c1 * dsz3
            hess[i, 2, 0, 2] = hess[i, 2, 2, 0] = -s1 * dsz3
            hess[i, 1, 1, 1] = -s1 * ddsz22
            hess[i, 2, 1, 1] = c1 * ddsz22
            hess[i, 1, 1, 2] = hess[i, 1, 2, 1] = hess[i, 1, 2, 2] = -s1 * ddsz23
            hess[i, 2, 1, 2] = hess[i, 2, 2, 1] = hess[i, 2, 2, 2] = c1 * ddsz23
    return r, jac, hess


def forward_kinematics(q_joints: np.ndarray, params: RobotParams):
    """Per-leg foot positions (4, 3) and Jacobians (4, 3, 3) in the body frame."""
    q = np.ascontiguousarray(np.asarray(q_joints, dtype=float).reshape(4, 3))
    l1, l2 = params.link_lengths
    positions, jacobians, _ = _fk_batch(q, params.hips_array, l1, l2, False)
    return positions, jacobians


def forward_kinematics_full(q_joints: np.ndarray, params: RobotParams):
    """Positions, Jacobians and Hessians (4, 3, 3, 3) for all legs."""
    q = np.ascontiguousarray(np.asarray(q_joints, dtype=float).reshape(4, 3))
    l1, l2 = params.link_lengths
    return _fk_batch(q, params.hips_array, l1, l2, True)


# ---------------------------------------------------------------------------
# Equations of motion


def gravity_body_frame(theta: np.ndarray, params: RobotParams) -> np.ndarray:
    g_world = np.array([0.0, 0.0, -params.gravity])
    return rotation_body_to_world(theta).T @ g_world


@numba.njit(cache=True)
def _dynamics_kernel(x, u, hips, l1, l2, inertia, mass, gravity):
    roll, pitch, yaw = x[0], x[1], x[2]
    sr, cr = np.sin(roll), np.cos(roll)
    sp, cp = np.sin(pitch), np.cos(pitch)
    sy, cy = np.sin(yaw), np.cos(yaw)
    tp = sp / cp

    # R = Rz(yaw) Ry(pitch) Rx(roll)
    R = np.empty((3, 3))
    R[0, 0] = cy * cp
    R[0, 1] = cy * sp * sr - sy * cr
    R[0, 2] = cy * sp * cr + sy * sr
    R[1, 0] = sy * cp
    R[1, 1] = sy * sp * sr + cy * cr
    R[1, 2] = sy * sp * cr - cy * sr
    R[2, 0] = -sp
    R[2, 1] = cp * sr
    R[2, 2] = cp * cr

    wx, wy, wz = x[6], x[7], x[8]
    q = np.ascontiguousarray(x[12:24]).reshape(4, 3)
    feet, _, _ = _fk_batch(q, hips, l1, l2, False)

    xdot = np.empty(24)
    # Euler-angle rates from the body angular rate
    xdot[0] = wx + sr * tp * wy + cr * tp * wz
    xdot[1] = cr * wy - sr * wz
    xdot[2] = (sr * wy + cr * wz) / cp
    # world-frame CoM rate
    for i in range(3):
        xdot[3 + i] = R[i, 0] * x[9] + R[i, 1] * x[10] + R[i, 2] * x[11]
    # torque of the contact forces about the CoM, body frame
    tx = ty = tz = 0.0
    fx = fy = fz = 0.0
    for leg in range(4):
        rx, ry, rz = feet[leg, 0], feet[leg, 1], feet[leg, 2]
        ux, uy, uz = u[3 * leg], u[3 * leg + 1], u[3 * leg + 2]
        tx += ry * uz - rz * uy
        ty += rz * ux - rx * uz
        tz += rx * uy - ry * ux
        fx += ux
        fy += uy
        fz += uz
    # gyroscopic term omega x (I omega) with diagonal inertia
    gx = wy * inertia[2] * wz - wz * inertia[1] * wy
    gy = wz * inertia[0] * wx - wx * inertia[2] * wz
    gz = wx * inertia[1] * wy - wy * inertia[0] * wx
    xdot[6] = (tx - gx) / inertia[0]
    xdot[7] = (ty - gy) / inertia[1]
    xdot[8] = (tz - gz) / inertia[2]
    # gravity in the body frame is R^T (0, 0, -g)
    xdot[9] = -R[2, 0] * gravity + fx / mass
    xdot[10] = -R[2, 1] * gravity + fy / mass
    xdot[11] = -R[2, 2] * gravity + fz / mass
    xdot[12:24] = u[12:24]
    return xdot


def dynamics(x: np.ndarray, u: np.ndarray, params: RobotParams) -> np.ndarray:
    """Time derivative of the 24-dim kinodynamic state."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if abs(x[1]) > params.max_pitch:
        raise ValueError(
            f"pitch {x[1]:.3f} rad too close to the Euler singularity at pi/2"
        )
    l1, l2 = params.link_lengths
    return _dynamics_kernel(
        x, u, params.hips_array, l1, l2, params.inertia_array,
        params.mass, params.gravity,
    )


def dynamics_jacobians(x: np.ndarray, u: np.ndarray, params: RobotParams):
    """Analytic (A, B) of the equations of motion."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    theta = x[THETA]
    omega = x[OMEGA]
    v = x[VELOCITY]
    q = x[JOINTS]
    forces = u[FORCES].reshape(4, 3)

    E = euler_rate_matrix(theta, params.max_pitch)
    dE = euler_rate_matrix_derivatives(theta)
    R = rotation_body_to_world(theta)
    dR = rotation_body_to_world_derivatives(theta)
    feet, jacs = forward_kinematics(q, params)
    inv_inertia = 1.0 / np.asarray(params.inertia_diag)
    g_world = np.array([0.0, 0.0, -params.gravity])

    A = np.zeros((NX, NX))
    B = np.zeros((NX, NU))

    # theta_dot = E(theta) omega
    A[0:3, 0:3] = (dE @ omega).T
    A[0:3, 6:9] = E

    # p_dot = R(theta) v
    A[3:6, 0:3] = (dR @ v).T
    A[3:6, 9:12] = R

    # omega_dot = I^-1 (-omega x I omega + sum r_j x F_j)
    inertia = params.inertia
    A[6:9, 6:9] = (skew(inertia @ omega) - skew(omega) @ inertia) * inv_inertia[:, None]
    for leg in range(4):
        A[6:9, 12 + 3 * leg : 15 + 3 * leg] = (
            -skew(forces[leg]) @ jacs[leg]
        ) * inv_inertia[:, None]
        B[6:9, 3 * leg : 3 * leg + 3] = skew(feet[leg]) * inv_inertia[:, None]

    # v_dot = R^T g_world + sum F_j / m
    A[9:12, 0:3] = (dR.transpose(0, 2, 1) @ g_world).T
    inv_m = 1.0 / params.mass
    for leg in range(4):
        B[9, 3 * leg] = inv_m
        B[10, 3 * leg + 1] = inv_m
        B[11, 3 * leg + 2] = inv_m

    # q_dot = u_J
    B[12:24, 12:24] = np.eye(12)
    return A, B


def default_stance_state(params: RobotParams) -> np.ndarray:
    """Standing state: default joints, level base, feet on the z=0 plane."""
    q = params.default_joints
    feet, _ = forward_kinematics(q, params)
    x = np.zeros(NX)
    x[POSITION] = np.array([0.0, 0.0, -float(np.mean(feet[:, 2]))])
    x[JOINTS] = q
    return x


def nominal_stance_input(
    params: RobotParams,
    contact_flags,
    theta: np.ndarray | None = None,
    joints: np.ndarray | None = None,
) -> np.ndarray:
    """Gravity-compensating stance forces balancing both force and torque.

    The weight is distributed over the stance legs by the minimum-norm
    solution of the static wrench balance at the given (default) leg
    configuration, so asymmetric support sets do not tip the body.
    """
    u = np.zeros(NU)
    stance = [leg for leg in range(4) if contact_flags[leg]]
    if not stance:
        return u
    q = params.default_joints if joints is None else np.asarray(joints, float)
    feet, _ = forward_kinematics(q, params)
    g_body = (
        np.array([0.0, 0.0, -params.gravity])
        if theta is None
        else gravity_body_frame(theta, params)
    )
    wrench_map = np.zeros((6, 3 * len(stance)))
    for i, leg in enumerate(stance):
        wrench_map[:3, 3 * i : 3 * i + 3] = np.eye(3)
        wrench_map[3:, 3 * i : 3 * i + 3] = skew(feet[leg])
    target = np.concatenate([-params.mass * g_body, np.zeros(3)])
    forces, *_ = np.linalg.lstsq(wrench_map, target, rcond=None)
    for i, leg in enumerate(stance):
        u[force_slice(leg)] = forces[3 * i : 3 * i + 3]
    return u


def foot_velocity_world_factors(x: np.ndarray, params: RobotParams):
    """Pieces of the world-frame foot velocity R (v + w x r + J qdot).

    Returns (R, feet, jacobians); used by the mode constraints.
    """
    theta = x[THETA]
    q = x[JOINTS]
    R = rotation_body_to_world(theta)
    feet, jacs = forward_kinematics(q, params)
    return R, feet, jacs
