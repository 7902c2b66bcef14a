"""Frequency-dependent input-cost shaping via per-input lead-lag filters.

Each input is costed through a high-pass weighting r(w) = (1 + beta*jw) /
(1 + alpha*jw) with beta > alpha, realized by optimizing auxiliary inputs nu
and augmenting the state with one first-order filter state per input. The
physical input is the filter output u = C_s x_s + D_s nu. All shaping
functions have unit DC gain, so steady-state solutions are unchanged while
high-frequency input content is penalized by beta/alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ocp import AffinePolicy, CostQuadratic, OcpDefinition, TimeGrid, Trajectory
from .slq import SlqSolution


@dataclass(frozen=True)
class FilterConfig:
    """Per-input lead-lag time constants with beta_i > alpha_i > 0."""

    alphas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.alphas) != len(self.betas):
            raise ValueError("alphas and betas must have equal length")
        for alpha, beta in zip(self.alphas, self.betas):
            if not (beta > alpha > 0.0):
                raise ValueError(
                    f"filter requires beta > alpha > 0, got alpha={alpha}, beta={beta}"
                )

    @property
    def n_inputs(self) -> int:
        return len(self.alphas)

    @classmethod
    def uniform(cls, n_inputs: int, alpha: float, beta: float) -> "FilterConfig":
        return cls(alphas=(alpha,) * n_inputs, betas=(beta,) * n_inputs)

    @classmethod
    def quadruped_default(
        cls,
        force_alpha: float = 0.01,
        force_beta: float = 0.2,
        joint_alpha: float = 0.01,
        joint_beta: float = 0.1,
    ) -> "FilterConfig":
        """Shapes all 24 quadruped inputs: 12 forces then 12 joint velocities."""
        return cls(
            alphas=(force_alpha,) * 12 + (joint_alpha,) * 12,
            betas=(force_beta,) * 12 + (joint_beta,) * 12,
        )


@dataclass(frozen=True)
class FilterRealization:
    """Block-diagonal state space of s(w) = r(w)^-1, one state per input."""

    A_s: np.ndarray
    B_s: np.ndarray
    C_s: np.ndarray
    D_s: np.ndarray

    @property
    def n_filters(self) -> int:
        return self.A_s.shape[0]

    def dc_gain(self) -> np.ndarray:
        return self.C_s @ np.linalg.solve(-self.A_s, self.B_s) + self.D_s

    def response(self, omega: float) -> np.ndarray:
        """Complex frequency response s(j*omega) as a diagonal matrix."""
        n = self.n_filters
        return self.C_s @ np.linalg.solve(
            1j * omega * np.eye(n) - self.A_s, self.B_s
        ) + self.D_s

    def weighting_response(self, omega: float) -> np.ndarray:
        """The cost weighting r(j*omega) = s(j*omega)^-1."""
        return np.linalg.inv(self.response(omega))


def realize_filters(cfg: FilterConfig) -> FilterRealization:
    """Scalar realization per input: A=-1/beta, B=1/beta, C=1-alpha/beta,
    D=alpha/beta, assembled block-diagonally. A_s is Hurwitz and the DC gain
    is exactly the identity."""
    alphas = np.asarray(cfg.alphas, dtype=float)
    betas = np.asarray(cfg.betas, dtype=float)
    return FilterRealization(
        A_s=np.diag(-1.0 / betas),
        B_s=np.diag(1.0 / betas),
        C_s=np.diag(1.0 - alphas / betas),
        D_s=np.diag(alphas / betas),
    )


def augment_ocp(ocp: OcpDefinition, real: FilterRealization) -> OcpDefinition:
    """State-augmented problem optimized over the auxiliary inputs.

    The augmented state is [x; x_s]; dynamics, equality and inequality
    constraints see the reconstructed physical input u = C_s x_s + D_s nu,
    while the cost evaluates its input terms directly on nu so the original
    diagonal input weights act as the DC weights of the shaped cost.
    """
    if real.n_filters != ocp.nu:
        raise ValueError(
            f"filter count {real.n_filters} must match input dimension {ocp.nu}"
        )
    nx, nu, nf = ocp.nx, ocp.nu, real.n_filters
    nxa = nx + nf
    A_s, B_s, C_s, D_s = real.A_s, real.B_s, real.C_s, real.D_s

    def split(xa):
        return xa[:nx], xa[nx:]

    def physical_input(xs, nu_in):
        return C_s @ xs + D_s @ nu_in

    def dynamics(xa, nu_in, t):
        x, xs = split(xa)
        u = physical_input(xs, nu_in)
        out = np.empty(nxa)
        out[:nx] = ocp.dynamics(x, u, t)
        out[nx:] = A_s @ xs + B_s @ nu_in
        return out

    def dynamics_jacobians(xa, nu_in, t):
        x, xs = split(xa)
        u = physical_input(xs, nu_in)
        A, B = ocp.eval_dynamics_jacobians(x, u, t)
        Aa = np.zeros((nxa, nxa))
        Aa[:nx, :nx] = A
        Aa[:nx, nx:] = B @ C_s
        Aa[nx:, nx:] = A_s
        Ba = np.zeros((nxa, nu))
        Ba[:nx] = B @ D_s
        Ba[nx:] = B_s
        return Aa, Ba

    def running_cost(xa, nu_in, t):
        x, _ = split(xa)
        return ocp.running_cost(x, nu_in, t)

    def running_cost_quadratic(xa, nu_in, t):
        x, _ = split(xa)
        quad = ocp.eval_running_cost_quadratic(x, nu_in, t)
        q = np.zeros(nxa)
        q[:nx] = quad.q
        Q = np.zeros((nxa, nxa))
        Q[:nx, :nx] = quad.Q
        P = np.zeros((nu, nxa))
        P[:, :nx] = quad.P
        return CostQuadratic(q0=quad.q0, q=q, r=quad.r, Q=Q, R=quad.R, P=P)

    def terminal_cost(xa):
        return ocp.terminal_cost(xa[:nx])

    def terminal_cost_quadratic(xa):
        q0, q, Q = ocp.eval_terminal_cost_quadratic(xa[:nx])
        qa = np.zeros(nxa)
        qa[:nx] = q
        Qa = np.zeros((nxa, nxa))
        Qa[:nx, :nx] = Q
        return q0, qa, Qa

    eq_constraints = None
    eq_constraint_jacobians = None
    if ocp.eq_constraints is not None:

        def eq_constraints(xa, nu_in, t):
            x, xs = split(xa)
            return ocp.eq_constraints(x, physical_input(xs, nu_in), t)

        def eq_constraint_jacobians(xa, nu_in, t):
            x, xs = split(xa)
            u = physical_input(xs, nu_in)
            C, D = ocp.eval_eq_constraint_jacobians(x, u, t)
            Ca = np.zeros((C.shape[0], nxa))
            Ca[:, :nx] = C
            Ca[:, nx:] = D @ C_s
            return Ca, D @ D_s

    state_eq = None
    state_eq_jac = None
    if ocp.state_eq_constraints is not None:

        def state_eq(xa, t):
            return ocp.state_eq_constraints(xa[:nx], t)

        def state_eq_jac(xa, t):
            J = ocp.eval_state_eq_jacobian(xa[:nx], t)
            Ja = np.zeros((J.shape[0], nxa))
            Ja[:, :nx] = J
            return Ja

    inequalities = None
    inequality_derivatives = None
    if ocp.inequalities is not None:

        def inequalities(xa, nu_in, t):
            x, xs = split(xa)
            return ocp.inequalities(x, physical_input(xs, nu_in), t)

        def inequality_derivatives(xa, nu_in, t):
            x, xs = split(xa)
            u = physical_input(xs, nu_in)
            values, grads, hessians = ocp.eval_inequality_derivatives(x, u, t)
            m = values.size
            # map the (x, u) direction to (x, x_s, nu): u = C_s x_s + D_s nu
            T = np.zeros((nx + nu, nxa + nu))
            T[:nx, :nx] = np.eye(nx)
            T[nx:, nx:nxa] = C_s
            T[nx:, nxa:] = D_s
            grads_a = grads @ T
            hessians_a = np.einsum("mij,ia,jb->mab", hessians, T, T)
            return values, grads_a, hessians_a

    def state_sampler(rng: np.random.Generator) -> np.ndarray:
        x = ocp.sample_state(rng)
        xs = ocp.sample_input(rng)
        return np.concatenate([x, xs])

    return OcpDefinition(
        nx=nxa,
        nu=nu,
        dynamics=dynamics,
        dynamics_jacobians=dynamics_jacobians,
        running_cost=running_cost,
        running_cost_quadratic=running_cost_quadratic,
        terminal_cost=terminal_cost,
        terminal_cost_quadratic=terminal_cost_quadratic,
        eq_constraints=eq_constraints,
        eq_constraint_jacobians=eq_constraint_jacobians,
        state_eq_constraints=state_eq,
        state_eq_constraint_jacobian=state_eq_jac,
        inequalities=inequalities,
        inequality_derivatives=inequality_derivatives,
        barrier=ocp.barrier,
        mode_schedule=ocp.mode_schedule,
        state_sampler=state_sampler,
        input_sampler=ocp.input_sampler,
    )


def augment_initial_state(
    x0: np.ndarray, u0: np.ndarray, real: FilterRealization
) -> np.ndarray:
    """Initial augmented state with the filters at steady state for u0.

    With unit DC gain the steady-state filter state equals the input, which
    avoids spurious startup transients from zero-initialized filters.
    """
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    xs0 = np.linalg.solve(-real.A_s, real.B_s @ u0)
    return np.concatenate([x0, xs0])


@dataclass(frozen=True)
class AugmentedPolicy:
    """Feedback policy on the augmented state with reconstructed input rows.

    The physical input follows u = C_s x_s + D_s nu under the optimized
    auxiliary policy: its feedforward is C_s x_s*(t) + D_s nu*(t) and its
    gain blocks are [D_s K_nx, D_s K_nxs + C_s]; the auxiliary rows pass
    through unchanged.
    """

    grid: TimeGrid
    realization: FilterRealization
    x_star: Trajectory       # augmented nominal state [x; x_s]
    nu_star: Trajectory      # auxiliary-input nominal
    u_star: Trajectory       # reconstructed physical-input nominal
    gains_nu: np.ndarray     # (n_nodes, nu, nx + nf) auxiliary rows
    gains_u: np.ndarray      # (n_nodes, nu, nx + nf) reconstructed rows

    @property
    def n_system_states(self) -> int:
        return self.x_star.dim - self.realization.n_filters

    def gain_blocks(self, k: int):
        """(K_nu_x, K_nu_xs, K_u_x, K_u_xs) at node k."""
        nx = self.n_system_states
        return (
            self.gains_nu[k][:, :nx],
            self.gains_nu[k][:, nx:],
            self.gains_u[k][:, :nx],
            self.gains_u[k][:, nx:],
        )

    def evaluate(self, x_aug: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Physical and auxiliary inputs at an augmented state."""
        x_aug = np.asarray(x_aug, dtype=float)
        dx = x_aug - self.x_star.at(t)
        k, frac = self.grid.locate(t)
        if frac == 0.0:
            Ku, Kn = self.gains_u[k], self.gains_nu[k]
        elif frac == 1.0:
            Ku, Kn = self.gains_u[k + 1], self.gains_nu[k + 1]
        else:
            Ku = (1.0 - frac) * self.gains_u[k] + frac * self.gains_u[k + 1]
            Kn = (1.0 - frac) * self.gains_nu[k] + frac * self.gains_nu[k + 1]
        u = self.u_star.at(t) + Ku @ dx
        nu_val = self.nu_star.at(t) + Kn @ dx
        return u, nu_val


def reconstruct_policy(
    aug_solution: SlqSolution, real: FilterRealization
) -> AugmentedPolicy:
    """Recover the physical-input feedback policy from an augmented solve."""
    policy: AffinePolicy = aug_solution.policy
    nf = real.n_filters
    nx = policy.nx - nf
    if nx <= 0:
        raise ValueError("augmented policy has fewer states than filters")
    grid = policy.grid
    n = grid.n_nodes
    C_s, D_s = real.C_s, real.D_s

    xs_star = policy.x_star.values[:, nx:]
    nu_star = policy.u_star.values
    u_star = xs_star @ C_s.T + nu_star @ D_s.T

    gains_nu = policy.gains
    gains_u = np.empty_like(gains_nu)
    for k in range(n):
        gains_u[k, :, :nx] = D_s @ gains_nu[k][:, :nx]
        gains_u[k, :, nx:] = D_s @ gains_nu[k][:, nx:] + C_s

    return AugmentedPolicy(
        grid=grid,
        realization=real,
        x_star=policy.x_star,
        nu_star=Trajectory(grid, nu_star),
        u_star=Trajectory(grid, u_star),
        gains_nu=gains_nu,
        gains_u=gains_u,
    )


def controller_frequency_response(
    K_nu_x: np.ndarray,
    K_nu_xs: np.ndarray,
    real: FilterRealization,
    omega: float,
) -> np.ndarray:
    """Transfer matrix from state deviation to physical input of the
    reconstructed dynamic controller at one frequency.

    Closing nu = K_nu_x dx + K_nu_xs x_s over the filter dynamics gives
    G(jw) = (C_s + D_s K_nu_xs)(jwI - A_s - B_s K_nu_xs)^-1 B_s K_nu_x
            + D_s K_nu_x.
    """
    nf = real.n_filters
    closed = real.A_s + real.B_s @ K_nu_xs
    resolvent = np.linalg.solve(1j * omega * np.eye(nf) - closed, real.B_s @ K_nu_x)
    return (real.C_s + real.D_s @ K_nu_xs) @ resolvent + real.D_s @ K_nu_x
