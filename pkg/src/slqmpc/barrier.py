"""Relaxed log-barrier penalties and the perturbed friction cone.

The barrier is the standard ``-ln(h)`` on the interior, switched to a
quadratic extension below a threshold ``delta`` so that it is defined (and
twice differentiable) on all of R. Infeasible iterates are therefore
penalized instead of undefined, and the curvature is capped at ``1/delta^2``.

The friction cone is handled as a scalar inequality
``mu_c*Fz - sqrt(Fx^2 + Fy^2 + eps^2) >= 0`` on forces expressed in the
local surface frame. The ``eps`` perturbation makes the constraint smooth at
the force origin while staying a conservative inner approximation of the
true Coulomb cone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BarrierConfig:
    """Weights of the barrier-augmented cost.

    mu: multiplier of the summed barrier terms, > 0.
    delta: constraint value below which the quadratic extension is used, > 0.
    epsilon: cone perturbation in force units (N), >= 0.
    """

    mu: float = 0.5
    delta: float = 0.1
    epsilon: float = 5.0

    def __post_init__(self) -> None:
        if not (self.mu > 0.0):
            raise ValueError(f"barrier weight mu must be > 0, got {self.mu}")
        if not (self.delta > 0.0):
            raise ValueError(f"relaxation threshold delta must be > 0, got {self.delta}")
        if self.epsilon < 0.0:
            raise ValueError(f"cone perturbation epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class ConeSpec:
    """Friction cone geometry: unit surface normal and friction coefficient."""

    n_hat: tuple[float, float, float] = (0.0, 0.0, 1.0)
    mu_c: float = 0.7

    def __post_init__(self) -> None:
        n = np.asarray(self.n_hat, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError(f"n_hat must be a unit 3-vector, got {self.n_hat}")
        if not (self.mu_c > 0.0):
            raise ValueError(f"friction coefficient mu_c must be > 0, got {self.mu_c}")

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.n_hat, dtype=float)


def relaxed_barrier(h, cfg: BarrierConfig):
    """Barrier value and first two derivatives, elementwise over ``h``.

    For h >= delta this is (-ln h, -1/h, 1/h^2). Below delta the quadratic
    extension 0.5*(((h - 2*delta)/delta)^2 - 1) - ln(delta) takes over; value
    and both derivatives are continuous at the switch.
    """
    h_arr = np.asarray(h, dtype=float)
    delta = cfg.delta
    interior = h_arr >= delta

    value = np.empty_like(h_arr)
    d1 = np.empty_like(h_arr)
    d2 = np.empty_like(h_arr)

    hi = h_arr[interior]
    value[interior] = -np.log(hi)
    d1[interior] = -1.0 / hi
    d2[interior] = 1.0 / hi**2

    he = h_arr[~interior]
    z = (he - 2.0 * delta) / delta
    value[~interior] = 0.5 * (z**2 - 1.0) - np.log(delta)
    d1[~interior] = z / delta
    d2[~interior] = 1.0 / delta**2

    if np.isscalar(h) or np.ndim(h) == 0:
        return float(value), float(d1), float(d2)
    return value, d1, d2


def barrier_penalty(h_values: np.ndarray, cfg: BarrierConfig) -> float:
    """Total barrier contribution mu * sum_i B(h_i) to the running cost."""
    if h_values.size == 0:
        return 0.0
    value, _, _ = relaxed_barrier(h_values, cfg)
    return cfg.mu * float(np.sum(value))


def augment_cost(
    quad,
    h_values: np.ndarray,
    h_gradients: np.ndarray,
    h_hessians: np.ndarray,
    cfg: BarrierConfig,
    nx: int,
):
    """Add the barrier terms of every inequality to a quadratic cost model.

    ``quad`` is a CostQuadratic (see ocp module); gradients are stacked as
    (m, nx+nu) rows over the concatenated (x, u) direction and hessians as
    (m, nx+nu, nx+nu). Returns a new CostQuadratic. The chain rule gives
    value mu*B(h), gradient mu*B'(h)*grad_h and Hessian
    mu*(B''(h)*grad_h*grad_h^T + B'(h)*hess_h); the Hessian contribution is
    symmetric by construction.
    """
    m = int(np.asarray(h_values).size)
    if m == 0:
        return quad
    if h_gradients.shape[0] != m or h_gradients.shape[1] != quad.q.size + quad.r.size:
        raise ValueError(
            f"inequality gradient shape {h_gradients.shape} inconsistent with "
            f"{m} constraints over nx+nu={quad.q.size + quad.r.size}"
        )

    value, d1, d2 = relaxed_barrier(np.asarray(h_values, dtype=float), cfg)
    d1 = np.atleast_1d(d1)
    d2 = np.atleast_1d(d2)
    mu = cfg.mu
    gx = h_gradients[:, :nx]
    gu = h_gradients[:, nx:]
    w1 = mu * d1
    w2 = mu * d2

    q0 = quad.q0 + mu * float(np.sum(value))
    q = quad.q + gx.T @ w1
    r = quad.r + gu.T @ w1
    curved_x = gx * w2[:, None]
    Q = quad.Q + curved_x.T @ gx + np.tensordot(w1, h_hessians[:, :nx, :nx], axes=1)
    R = quad.R + (gu * w2[:, None]).T @ gu + np.tensordot(w1, h_hessians[:, nx:, nx:], axes=1)
    P = quad.P + (gu * w2[:, None]).T @ gx + np.tensordot(w1, h_hessians[:, nx:, :nx], axes=1)

    Q = 0.5 * (Q + Q.T)
    R = 0.5 * (R + R.T)
    return type(quad)(q0=q0, q=q, r=r, Q=Q, R=R, P=P)


def perturbed_cone(F: np.ndarray, spec: ConeSpec, epsilon: float):
    """Perturbed friction-cone value with exact first and second derivatives.

    ``F`` holds local-frame forces (Fx, Fy, Fz) in Newtons. Returns
    (h, gradient, hessian) of h = mu_c*Fz - sqrt(Fx^2 + Fy^2 + eps^2).
    h is concave, so the Hessian is negative semi-definite. The perturbation
    must be positive unless the tangential force is nonzero, since the
    unperturbed cone has no gradient at the origin.
    """
    F = np.asarray(F, dtype=float)
    if F.shape != (3,):
        raise ValueError(f"expected a local force 3-vector, got shape {F.shape}")
    fx, fy, fz = F
    tangential_sq = fx**2 + fy**2
    if epsilon == 0.0 and tangential_sq == 0.0:
        raise ValueError("perturbed cone with epsilon=0 is not differentiable at Fx=Fy=0")

    s = float(np.sqrt(tangential_sq + epsilon**2))
    h = spec.mu_c * fz - s
    grad = np.array([-fx / s, -fy / s, spec.mu_c])

    hess = np.zeros((3, 3))
    hess[0, 0] = -(1.0 - fx**2 / s**2) / s
    hess[1, 1] = -(1.0 - fy**2 / s**2) / s
    hess[0, 1] = hess[1, 0] = fx * fy / s**3
    return h, grad, hess


def cone_values(forces: np.ndarray, mu_c: float, epsilon: float) -> np.ndarray:
    """Vectorized perturbed-cone values for an (..., 3) array of local forces."""
    forces = np.asarray(forces, dtype=float)
    return mu_c * forces[..., 2] - np.sqrt(
        forces[..., 0] ** 2 + forces[..., 1] ** 2 + epsilon**2
    )


def surface_frame(n_hat: np.ndarray) -> np.ndarray:
    """Orthonormal frame with the z-column aligned to the surface normal.

    The first tangent is the Gram-Schmidt projection of the world x-axis,
    falling back to the y-axis when the normal is within 1e-6 of x.
    """
    n = np.asarray(n_hat, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError("surface normal must be a unit vector")
    seed = np.array([1.0, 0.0, 0.0])
    if np.linalg.norm(np.cross(seed, n)) < 1e-6:
        seed = np.array([0.0, 1.0, 0.0])
    t1 = seed - np.dot(seed, n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.column_stack([t1, t2, n])


def project_to_local_frame(
    force: np.ndarray, n_hat: np.ndarray, rotation: np.ndarray | None = None
) -> np.ndarray:
    """Express a contact force in the surface-local frame (Fx, Fy, Fz).

    ``rotation`` optionally maps the force into the frame the normal is
    expressed in (e.g. body-to-world) and must be orthonormal. Fz aligns with
    the normal and the Euclidean norm is preserved.
    """
    f = np.asarray(force, dtype=float)
    if rotation is not None:
        rotation = np.asarray(rotation, dtype=float)
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > 1e-9:
            raise ValueError("frame rotation must be orthonormal")
        f = rotation @ f
    return surface_frame(n_hat).T @ f
