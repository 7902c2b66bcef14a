"""Gauss-Newton trajectory optimizer with a constrained Riccati backward pass.

Each iteration rolls the current affine policy forward with RK4, builds the
barrier-augmented LQ approximation around the resulting trajectories, solves
the equality-constrained Riccati differential equation backward in time, and
line searches over the feedforward increment (feedback is always applied in
full). State-input equalities are enforced by projecting the unconstrained
update onto the constraint nullspace; state-only equalities enter the merit
function through a fixed quadratic penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .barrier import barrier_penalty
from .errors import ConstraintRankError
from .ocp import (
    AffinePolicy,
    LqProblem,
    OcpDefinition,
    TimeGrid,
    Trajectory,
    build_lq_problem,
)


@dataclass(frozen=True)
class SlqSettings:
    """Solver knobs. Line-search steps halve from 1 down to ~2e-3."""

    max_iterations: int = 30
    tolerance: float = 1e-4  # relative cost decrease at which to stop
    line_search_steps: tuple[float, ...] = tuple(0.5**i for i in range(10))
    armijo: float = 1e-4
    state_penalty: float = 1e3  # weight on ||g2||^2 in the merit function
    # merit-only weight on ||g1||^2: keeps the line search from rejecting the
    # constraint-restoration part of the feedforward (which can raise the
    # tracking cost while fixing feasibility); it never enters the LQ model,
    # so gains stay purely projection-based
    eq_penalty: float = 1e3
    riccati_substeps: int = 4
    divergence_threshold: float = 1e8
    # re-roll the returned policy so the reported cost is reproducible by an
    # independent rollout; MPC loops may disable this for speed, accepting
    # the line-search bookkeeping cost instead
    verify_solution: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not (self.tolerance > 0.0 and self.state_penalty >= 0.0):
            raise ValueError("tolerance and state_penalty must be positive")
        if self.riccati_substeps < 1:
            raise ValueError("riccati_substeps must be >= 1")
        steps = self.line_search_steps
        if not steps or any(b >= a for a, b in zip(steps, steps[1:])):
            raise ValueError("line-search steps must be decreasing")


@dataclass(frozen=True)
class IterationRecord:
    """One accepted (or terminating) solver iteration."""

    iteration: int
    cost: float
    step_size: float
    eq_violation: float
    ineq_violation: float
    predicted_decrease: float

    def as_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "cost": self.cost,
            "step_size": self.step_size,
            "eq_violation": self.eq_violation,
            "ineq_violation": self.ineq_violation,
            "predicted_decrease": self.predicted_decrease,
        }


@dataclass(frozen=True)
class ValueFunctionQuad:
    """Quadratic value function V(dx, t) = 0.5 dx.S dx + s.dx + s0 per node."""

    grid: TimeGrid
    S: np.ndarray  # (n_nodes, nx, nx)
    s: np.ndarray  # (n_nodes, nx)
    s0: np.ndarray  # (n_nodes,)


@dataclass(frozen=True)
class RolloutResult:
    """Forward-pass outcome; trajectories are None when diverged.

    ``eq_residual_integral`` is the time integral of ||g1||^2 along the
    trajectory (unweighted), used to extend the LQ-predicted decrease with
    the feasibility gain of the constraint restoration.
    """

    x: Optional[Trajectory]
    u: Optional[Trajectory]
    cost: float
    eq_violation: float
    ineq_violation: float
    diverged: bool
    eq_residual_integral: float = 0.0


@dataclass(frozen=True)
class BackwardPassResult:
    value_function: ValueFunctionQuad
    gains: np.ndarray  # (n_nodes, nu, nx)
    feedforward: np.ndarray  # (n_nodes, nu)
    predicted_decrease: float


@dataclass(frozen=True)
class SlqSolution:
    """Converged (or best-so-far) policy with diagnostics.

    ``cost`` is computed by an independent rollout of the returned policy,
    so re-rolling the policy reproduces it exactly.
    """

    policy: AffinePolicy
    cost: float
    eq_violation: float
    ineq_violation: float
    iterations: int
    status: str  # converged | max_iterations | line_search_failed | backward_pass_failed
    value_function: Optional[ValueFunctionQuad]
    iteration_log: tuple[IterationRecord, ...]


# ---------------------------------------------------------------------------
# Forward pass


def rollout(
    ocp: OcpDefinition,
    policy: AffinePolicy,
    x0: np.ndarray,
    step_scale: float = 1.0,
    feedforward: Optional[np.ndarray] = None,
    state_penalty: float = 0.0,
    eq_penalty: float = 0.0,
    divergence_threshold: float = 1e8,
) -> RolloutResult:
    """Integrate the closed-loop dynamics under the policy with fixed-step RK4.

    The applied input is u*(t) + step_scale*dff(t) + K(t)(x - x*(t)) where the
    feedforward increment ``dff`` (per-node, linearly interpolated) is blended
    by the line-search step while feedback stays at full strength. The cost
    accumulates the running cost, barrier terms, the ``state_penalty``
    weighted squared state-equality residual, and the ``eq_penalty`` weighted
    squared state-input equality residual with trapezoidal quadrature, plus
    the terminal cost. A non-finite state is reported as a diverged rollout,
    not an exception.
    """
    grid = policy.grid
    n = grid.n_nodes
    dt = grid.dt
    ts = grid.times
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (policy.nx,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({policy.nx},)")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    if not (0.0 < step_scale <= 1.0):
        raise ValueError(f"step_scale must be in (0, 1], got {step_scale}")

    xs_ref = policy.x_star.values
    us_ref = policy.u_star.values
    gains = policy.gains
    dff = feedforward if feedforward is not None else None

    def control(x: np.ndarray, t: float) -> np.ndarray:
        k, frac = grid.locate(t)
        if frac == 0.0:
            u_nom, x_nom, K = us_ref[k], xs_ref[k], gains[k]
            ff = dff[k] if dff is not None else None
        elif frac == 1.0:
            u_nom, x_nom, K = us_ref[k + 1], xs_ref[k + 1], gains[k + 1]
            ff = dff[k + 1] if dff is not None else None
        else:
            w = frac
            u_nom = (1.0 - w) * us_ref[k] + w * us_ref[k + 1]
            x_nom = (1.0 - w) * xs_ref[k] + w * xs_ref[k + 1]
            K = (1.0 - w) * gains[k] + w * gains[k + 1]
            ff = (1.0 - w) * dff[k] + w * dff[k + 1] if dff is not None else None
        u = u_nom + K @ (x - x_nom)
        if ff is not None:
            u = u + step_scale * ff
        return u

    xs = np.empty((n, policy.nx))
    us = np.empty((n, policy.nu))
    xs[0] = x0
    f = ocp.dynamics
    diverged = False
    try:
        for k in range(n - 1):
            t = ts[k]
            x = xs[k]
            u0 = control(x, t)
            us[k] = u0
            k1 = f(x, u0, t)
            th = t + 0.5 * dt
            x2 = x + 0.5 * dt * k1
            k2 = f(x2, control(x2, th), th)
            x3 = x + 0.5 * dt * k2
            k3 = f(x3, control(x3, th), th)
            t1 = ts[k + 1]
            x4 = x + dt * k3
            k4 = f(x4, control(x4, t1), t1)
            x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next)) > divergence_threshold:
                diverged = True
                break
            xs[k + 1] = x_next
        if not diverged:
            us[n - 1] = control(xs[n - 1], ts[n - 1])
    except (ValueError, FloatingPointError):
        # the model left its validity domain (e.g. an orientation
        # singularity): same outcome as a numerically diverged state
        diverged = True

    if diverged:
        return RolloutResult(
            x=None, u=None, cost=np.inf, eq_violation=np.inf,
            ineq_violation=np.inf, diverged=True,
        )

    running = np.empty(n)
    eq_sq = np.zeros(n)
    eq_viol = 0.0
    ineq_viol = 0.0
    for k in range(n):
        x, u, t = xs[k], us[k], ts[k]
        stage = float(ocp.running_cost(x, u, t))
        if ocp.inequalities is not None:
            h = np.atleast_1d(ocp.inequalities(x, u, t))
            if h.size:
                if ocp.barrier is not None:
                    stage += barrier_penalty(h, ocp.barrier)
                ineq_viol = max(ineq_viol, float(np.max(np.maximum(-h, 0.0), initial=0.0)))
        if ocp.state_eq_constraints is not None:
            g2 = np.atleast_1d(ocp.state_eq_constraints(x, t))
            if g2.size:
                stage += state_penalty * float(g2 @ g2)
                eq_viol = max(eq_viol, float(np.max(np.abs(g2))))
        if ocp.eq_constraints is not None:
            g1 = np.atleast_1d(ocp.eq_constraints(x, u, t))
            if g1.size:
                eq_sq[k] = float(g1 @ g1)
                stage += eq_penalty * eq_sq[k]
                eq_viol = max(eq_viol, float(np.max(np.abs(g1))))
        running[k] = stage
    cost = float(np.trapezoid(running, dx=dt) + ocp.terminal_cost(xs[-1]))

    return RolloutResult(
        x=Trajectory(grid, xs),
        u=Trajectory(grid, us),
        cost=cost,
        eq_violation=eq_viol,
        ineq_violation=ineq_viol,
        diverged=False,
        eq_residual_integral=float(np.trapezoid(eq_sq, dx=dt)),
    )


# ---------------------------------------------------------------------------
# Backward pass


_PROJECTION_CONDITION_FLOOR = 1e-6  # smallest allowed eig(G) / eig_max(G)


def _constrained_gain(R_cho, M, m, C, D, e):
    """Feedback and feedforward minimizing the LQ Hamiltonian subject to
    C dx + D du + e = 0.

    Uses the R-weighted right pseudo-inverse W G^-1 with W = R^-1 D^T and
    G = D R^-1 D^T, which is exact for the constrained quadratic subproblem
    and reduces to K = -R^-1 (P + B^T S) without constraints. The projection
    guarantees D K + C = 0 and D k + e = 0 wherever D is well conditioned;
    a near-singular Gram matrix (constraint direction close to losing input
    authority, e.g. a straightened leg) is Tikhonov-damped so the gains stay
    bounded instead of exploding the Riccati flow.
    """
    RinvM = cho_solve(R_cho, M)
    Rinvm = cho_solve(R_cho, m)
    if D.shape[0] == 0:
        return -RinvM, -Rinvm
    W = cho_solve(R_cho, D.T)
    G = D @ W
    G = 0.5 * (G + G.T)
    eigs = np.linalg.eigvalsh(G)
    floor = _PROJECTION_CONDITION_FLOOR * eigs[-1]
    if eigs[-1] <= 0.0:
        raise ConstraintRankError("constraint Gram matrix singular in backward pass")
    if eigs[0] < floor:
        G = G + (floor - eigs[0]) * np.eye(G.shape[0])
    K = -RinvM + W @ np.linalg.solve(G, D @ RinvM - C)
    k = -Rinvm + W @ np.linalg.solve(G, D @ Rinvm - e)
    return K, k


@numba.njit(cache=True)
def _integrate_interval(
    S, s, s0, dt, substeps,
    A_l, A_r, B_l, B_r, Q_l, Q_r, R_l, R_r, P_l, P_r,
    q_l, q_r, r_l, r_r, q0_l, q0_r, C, D, e,
):
    """RK4 step of the projected Riccati flow across one grid interval.

    Smooth matrices interpolate linearly between the interval endpoints;
    constraint matrices are fixed (the left node owns the interval). The
    compact form substitutes the constrained-optimal input analytically:
    with M = P + B^T S, Rp = R^-1 - W G^-1 W^T, Omega = W G^-1,
      -dS/dt = Q + SA + (SA)^T - M^T Rp M - (M^T Omega C + sym) + C^T G^-1 C.
    G carries an unconditional relative Tikhonov floor; the per-node output
    gains are computed elsewhere with the exact projection. Returns ok=False
    when the iterate leaves the finite range.
    """
    nx = A_l.shape[0]
    nu = B_l.shape[1]
    nc = D.shape[0]
    n_lattice = 2 * substeps + 1
    h = dt / substeps

    A_s = np.empty((n_lattice, nx, nx))
    B_s = np.empty((n_lattice, nx, nu))
    Q_s = np.empty((n_lattice, nx, nx))
    P_s = np.empty((n_lattice, nu, nx))
    q_s = np.empty((n_lattice, nx))
    r_s = np.empty((n_lattice, nu))
    q0_s = np.empty(n_lattice)
    Rinv_s = np.empty((n_lattice, nu, nu))
    W_s = np.empty((n_lattice, nu, nc))
    OmegaC_s = np.empty((n_lattice, nu, nx))
    CGC_s = np.empty((n_lattice, nx, nx))
    GinvC_s = np.empty((n_lattice, nc, nx))
    Ginv_e_s = np.empty((n_lattice, nc))
    Omega_s = np.empty((n_lattice, nu, nc))

    for li in range(n_lattice):
        w = li / (n_lattice - 1.0)
        A_s[li] = (1.0 - w) * A_l + w * A_r
        B_s[li] = (1.0 - w) * B_l + w * B_r
        Q_s[li] = (1.0 - w) * Q_l + w * Q_r
        P_s[li] = (1.0 - w) * P_l + w * P_r
        q_s[li] = (1.0 - w) * q_l + w * q_r
        r_s[li] = (1.0 - w) * r_l + w * r_r
        q0_s[li] = (1.0 - w) * q0_l + w * q0_r
        R = (1.0 - w) * R_l + w * R_r
        Rinv = np.linalg.inv(R)
        Rinv_s[li] = Rinv
        if nc > 0:
            W = Rinv @ D.T
            G = D @ W
            G = 0.5 * (G + G.T)
            norm1 = 0.0
            for j in range(nc):
                col = 0.0
                for i in range(nc):
                    col += abs(G[i, j])
                if col > norm1:
                    norm1 = col
            for i in range(nc):
                G[i, i] += 1e-6 * norm1
            Ginv = np.linalg.inv(G)
            Omega = W @ Ginv
            W_s[li] = W
            Omega_s[li] = Omega
            OmegaC_s[li] = Omega @ C
            GinvC = Ginv @ C
            GinvC_s[li] = GinvC
            CGC_s[li] = C.T @ GinvC
            Ginv_e_s[li] = Ginv @ e

    def rhs(S_c, s_c, s0_c, li):
        A = A_s[li]
        M = P_s[li] + B_s[li].T @ S_c
        m = r_s[li] + B_s[li].T @ s_c
        RinvM = Rinv_s[li] @ M
        Rinvm = Rinv_s[li] @ m
        SA = S_c @ A
        if nc == 0:
            Sdot = -(Q_s[li] + SA + SA.T - M.T @ RinvM)
            sdot = -(q_s[li] + A.T @ s_c - M.T @ Rinvm)
            s0dot = -(q0_s[li] - 0.5 * np.dot(m, Rinvm))
            return Sdot, sdot, s0dot
        W = W_s[li]
        WtM = W.T @ M
        WtM_m = W.T @ m
        RpM = RinvM - Omega_s[li] @ WtM
        Rpm = Rinvm - Omega_s[li] @ WtM_m
        MtOC = M.T @ OmegaC_s[li]
        Sdot = -(Q_s[li] + SA + SA.T - M.T @ RpM - MtOC - MtOC.T + CGC_s[li])
        sdot = -(
            q_s[li]
            + A.T @ s_c
            - M.T @ Rpm
            - GinvC_s[li].T @ WtM_m
            - WtM.T @ Ginv_e_s[li]
            + C.T @ Ginv_e_s[li]
        )
        s0dot = -(
            q0_s[li]
            - 0.5 * np.dot(m, Rpm)
            - np.dot(WtM_m, Ginv_e_s[li])
            + 0.5 * np.dot(e, Ginv_e_s[li])
        )
        return Sdot, sdot, s0dot

    ok = True
    for j in range(substeps):
        li_hi = n_lattice - 1 - 2 * j
        li_mid = li_hi - 1
        li_lo = li_hi - 2
        k1S, k1s, k10 = rhs(S, s, s0, li_hi)
        k2S, k2s, k20 = rhs(S - 0.5 * h * k1S, s - 0.5 * h * k1s, s0 - 0.5 * h * k10, li_mid)
        k3S, k3s, k30 = rhs(S - 0.5 * h * k2S, s - 0.5 * h * k2s, s0 - 0.5 * h * k20, li_mid)
        k4S, k4s, k40 = rhs(S - h * k3S, s - h * k3s, s0 - h * k30, li_lo)
        S = S - (h / 6.0) * (k1S + 2.0 * k2S + 2.0 * k3S + k4S)
        s = s - (h / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        s0 = s0 - (h / 6.0) * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
        S = 0.5 * (S + S.T)
        if not np.all(np.isfinite(S)) or np.max(np.abs(S)) > 1e12:
            ok = False
            break
    return S, s, s0, ok


def riccati_backward_pass(
    lq: LqProblem,
    terminal: Optional[tuple[np.ndarray, np.ndarray]] = None,
    substeps: int = 4,
    max_substeps: int = 64,
) -> BackwardPassResult:
    """Integrate the constrained Riccati differential equation backward.

    The value-function quadratic (S, s, s0) is integrated with fixed-step RK4
    (``substeps`` per grid interval) from S(T) = Q_f. Smooth matrices are
    interpolated linearly inside an interval; equality-constraint matrices are
    held at the left node, whose mode owns the right-open interval. Per-node
    gains and feedforward increments are emitted from the node matrices, so
    D K + C = 0 and D k + e = 0 hold exactly at every node.

    The Riccati flow stiffens with the closed-loop bandwidth (roughly the
    inverse of the input-cost weights); when the fixed step leaves the
    stable region of the explicit integrator the pass is restarted with the
    substep count doubled, up to ``max_substeps``.
    """
    current = substeps
    while True:
        try:
            return _riccati_backward_fixed(lq, terminal, current)
        except FloatingPointError:
            if current >= max_substeps:
                raise
            current = min(2 * current, max_substeps)


def _riccati_backward_fixed(
    lq: LqProblem,
    terminal: Optional[tuple[np.ndarray, np.ndarray]],
    substeps: int,
) -> BackwardPassResult:
    grid = lq.grid
    n = grid.n_nodes
    nx, nu = lq.nx, lq.nu
    nodes = lq.nodes
    if terminal is not None:
        Qf, qf = terminal
        q0f = 0.0
    else:
        Qf, qf, q0f = lq.terminal_Q, lq.terminal_q, lq.terminal_q0

    S = 0.5 * (Qf + Qf.T)
    s = qf.copy()
    s0 = float(q0f)

    S_nodes = np.empty((n, nx, nx))
    s_nodes = np.empty((n, nx))
    s0_nodes = np.empty(n)
    gains = np.empty((n, nu, nx))
    ffwd = np.empty((n, nu))

    def node_gain(k: int, S_k: np.ndarray, s_k: np.ndarray):
        nd = nodes[k]
        R_cho = cho_factor(nd.R)
        M = nd.P + nd.B.T @ S_k
        m = nd.r + nd.B.T @ s_k
        return _constrained_gain(R_cho, M, m, nd.C, nd.D, nd.e)

    S_nodes[n - 1] = S
    s_nodes[n - 1] = s
    s0_nodes[n - 1] = s0
    gains[n - 1], ffwd[n - 1] = node_gain(n - 1, S, s)

    for k in range(n - 2, -1, -1):
        left, right = nodes[k], nodes[k + 1]

        # the explicit step must resolve the Lyapunov flow S A_cl + A_cl^T S;
        # bound its rate with the gains already emitted at the right node and
        # refine the substep count locally where the closed loop is stiff
        A_cl = right.A + right.B @ gains[k + 1]
        rate = 2.0 * np.sqrt(
            np.linalg.norm(A_cl, 1) * np.linalg.norm(A_cl, np.inf)
        )
        local_substeps = max(substeps, int(np.ceil(rate * grid.dt / 2.6)))

        S, s, s0, ok = _integrate_interval(
            S, s, s0, grid.dt, local_substeps,
            left.A, right.A, left.B, right.B, left.Q, right.Q,
            left.R, right.R, left.P, right.P,
            left.q, right.q, left.r, right.r, left.q0, right.q0,
            left.C, left.D, left.e,
        )
        if not ok:
            raise FloatingPointError(
                f"Riccati integration unstable at node {k} "
                f"with {local_substeps} substeps"
            )
        S_nodes[k] = S
        s_nodes[k] = s
        s0_nodes[k] = s0
        gains[k], ffwd[k] = node_gain(k, S, s)

    # predicted cost of the updated policy is s0 at t0; the nominal cost under
    # the same quadrature is the trapezoid of the node cost constants
    nominal_cost = float(
        np.trapezoid(np.array([nd.q0 for nd in nodes]), dx=grid.dt) + q0f
    )
    predicted_decrease = nominal_cost - float(s0_nodes[0])

    vf = ValueFunctionQuad(grid=grid, S=S_nodes, s=s_nodes, s0=s0_nodes)
    return BackwardPassResult(
        value_function=vf,
        gains=gains,
        feedforward=ffwd,
        predicted_decrease=predicted_decrease,
    )


# ---------------------------------------------------------------------------
# Outer loop


def solve(
    ocp: OcpDefinition,
    x0: np.ndarray,
    init_policy: AffinePolicy,
    settings: SlqSettings = SlqSettings(),
) -> SlqSolution:
    """Alternate forward rollouts and constrained Riccati passes until the
    relative cost decrease falls below tolerance.

    The line search accepts the largest step whose rollout cost improves on
    the Armijo bound built from the LQ-predicted decrease. A diverging
    initial policy is rejected with a diagnostic; if no line-search step
    improves the cost the current best solution is returned flagged
    ``line_search_failed``.
    """
    current = rollout(
        ocp, init_policy, x0,
        state_penalty=settings.state_penalty,
        eq_penalty=settings.eq_penalty,
        divergence_threshold=settings.divergence_threshold,
    )
    if current.diverged:
        raise ValueError(
            "initial policy rollout diverged; provide a stabilizing or "
            "feasible initialization"
        )

    grid = init_policy.grid
    cost = current.cost
    policy = init_policy
    bp: Optional[BackwardPassResult] = None
    log: list[IterationRecord] = []
    status = "max_iterations"
    iterations = 0

    for it in range(1, settings.max_iterations + 1):
        lq = build_lq_problem(ocp, current.x, current.u, settings.state_penalty)
        try:
            bp = riccati_backward_pass(lq, substeps=settings.riccati_substeps)
        except FloatingPointError:
            # keep the best iterate when the value function of the current
            # linearization cannot be integrated stably
            status = "backward_pass_failed"
            break
        # the LQ model does not see the g1 merit term; credit the predicted
        # decrease with the feasibility the constraint restoration recovers
        predicted = (
            bp.predicted_decrease
            + settings.eq_penalty * current.eq_residual_integral
        )
        if predicted <= settings.tolerance * max(1.0, abs(cost)):
            status = "converged"
            break

        accepted = None
        step = 0.0
        for alpha in settings.line_search_steps:
            candidate_policy = AffinePolicy(
                grid=grid,
                x_star=current.x,
                u_star=current.u,
                gains=bp.gains,
            )
            candidate = rollout(
                ocp, candidate_policy, x0,
                step_scale=alpha,
                feedforward=bp.feedforward,
                state_penalty=settings.state_penalty,
                eq_penalty=settings.eq_penalty,
                divergence_threshold=settings.divergence_threshold,
            )
            if candidate.diverged:
                continue
            if candidate.cost <= cost - settings.armijo * alpha * predicted:
                accepted = candidate
                step = alpha
                break
        if accepted is None:
            status = "line_search_failed"
            break

        previous_cost = cost
        current = accepted
        cost = accepted.cost
        iterations = it
        policy = AffinePolicy(
            grid=grid, x_star=current.x, u_star=current.u, gains=bp.gains
        )
        log.append(
            IterationRecord(
                iteration=it,
                cost=cost,
                step_size=step,
                eq_violation=current.eq_violation,
                ineq_violation=current.ineq_violation,
                predicted_decrease=predicted,
            )
        )
        if previous_cost - cost <= settings.tolerance * max(1.0, abs(previous_cost)):
            status = "converged"
            break

    if bp is not None:
        # attach the freshest gains even when no step was accepted (e.g. a
        # warm start that is already optimal): that is the policy to execute
        policy = AffinePolicy(
            grid=grid, x_star=current.x, u_star=current.u, gains=bp.gains
        )
    if settings.verify_solution:
        # report the cost of the policy actually returned: identical
        # re-rollouts of it must reproduce this number exactly
        verification = rollout(
            ocp, policy, x0,
            state_penalty=settings.state_penalty,
            eq_penalty=settings.eq_penalty,
            divergence_threshold=settings.divergence_threshold,
        )
    else:
        verification = current
    return SlqSolution(
        policy=policy,
        cost=verification.cost,
        eq_violation=verification.eq_violation,
        ineq_violation=verification.ineq_violation,
        iterations=iterations,
        status=status,
        value_function=bp.value_function if bp is not None else None,
        iteration_log=tuple(log),
    )


def shift_policy(policy: AffinePolicy, new_t0: float) -> AffinePolicy:
    """Resample a policy onto a grid starting at ``new_t0`` (same span/step).

    Node values inside the old range are interpolated; beyond the old horizon
    the last node's state, input and gain are held constant.
    """
    grid = policy.grid
    new_grid = TimeGrid(t0=new_t0, duration=grid.duration, dt=grid.dt)
    n = new_grid.n_nodes
    xs = np.empty((n, policy.nx))
    us = np.empty((n, policy.nu))
    Ks = np.empty((n, policy.nu, policy.nx))
    t_end = grid.t_end
    for k, t in enumerate(new_grid.times):
        if t >= t_end:
            xs[k] = policy.x_star.values[-1]
            us[k] = policy.u_star.values[-1]
            Ks[k] = policy.gains[-1]
        else:
            xs[k] = policy.x_star.at(t)
            us[k] = policy.u_star.at(t)
            Ks[k] = policy.gain_at(t)
    return AffinePolicy(
        grid=new_grid,
        x_star=Trajectory(new_grid, xs),
        u_star=Trajectory(new_grid, us),
        gains=Ks,
    )


def real_time_iteration(
    ocp: OcpDefinition,
    x0: np.ndarray,
    t0: float,
    warm_start: SlqSolution,
    settings: SlqSettings = SlqSettings(),
    budget: int = 1,
) -> SlqSolution:
    """Warm-started solve with a fixed iteration budget for MPC updates.

    The warm-start policy is shifted to the new horizon start, its tail
    extended by holding the final gain and input, and at most ``budget``
    solver iterations are run (budget 0 re-evaluates the shifted policy
    unchanged).
    """
    old_grid = warm_start.policy.grid
    if t0 < old_grid.t0 or t0 > old_grid.t_end:
        raise ValueError(
            f"new horizon start {t0} does not overlap warm-start grid "
            f"[{old_grid.t0}, {old_grid.t_end}]"
        )
    shifted = shift_policy(warm_start.policy, t0)
    rt_settings = replace(settings, max_iterations=budget)
    return solve(ocp, x0, shifted, rt_settings)
