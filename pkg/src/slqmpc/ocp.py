"""Optimal-control problem interface and linear-quadratic approximation data.

Everything here is immutable after construction and safe to share across
threads. Trajectories, gains and policies live on a uniform time grid and
are linearly interpolated between nodes; queries at node times return the
stored values exactly.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .barrier import BarrierConfig, augment_cost
from .errors import ConstraintRankError

# Regularization ladder for the input-cost Hessian; the smallest entry that
# lifts the minimum eigenvalue above EIG_FLOOR is used.
EIG_FLOOR = 1e-8
REGULARIZATION_LADDER = (0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2)


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with n_nodes = round(duration/dt) + 1 nodes."""

    t0: float
    duration: float
    dt: float
    n_nodes: int = field(init=False)

    def __post_init__(self) -> None:
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        n = int(round(self.duration / self.dt)) + 1
        if n < 2:
            raise ValueError(f"grid needs at least 2 nodes, got {n}")
        if abs((n - 1) * self.dt - self.duration) > 1e-12 * max(self.duration, 1.0):
            raise ValueError(
                f"dt={self.dt} does not evenly divide duration={self.duration}"
            )
        object.__setattr__(self, "n_nodes", n)

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_nodes) * self.dt

    def locate(self, t: float) -> tuple[int, float]:
        """Interval index and fractional position of ``t``; exact at nodes.

        Raises ValueError outside [t0, t_end] (with 1e-9*dt slack).
        """
        rel = (t - self.t0) / self.dt
        tol = 1e-9
        if rel < -tol or rel > self.n_nodes - 1 + tol:
            raise ValueError(
                f"time {t} outside grid range [{self.t0}, {self.t_end}]"
            )
        k = int(np.floor(rel))
        frac = rel - k
        if frac < tol:
            frac = 0.0
        elif frac > 1.0 - tol:
            k += 1
            frac = 0.0
        k = min(max(k, 0), self.n_nodes - 1)
        if k == self.n_nodes - 1:
            # query at the final node: report it exactly via frac == 1.0
            return self.n_nodes - 2, 1.0
        return k, frac


@dataclass(frozen=True)
class Trajectory:
    """Per-node values on a grid, linearly interpolated in between.

    ``values`` has shape (n_nodes, ...) and may hold vectors or matrices
    (e.g. gain matrices), interpolated entrywise.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _readonly(self.values)
        if values.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"expected {self.grid.n_nodes} node values, got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("trajectory values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def at(self, t: float) -> np.ndarray:
        k, frac = self.grid.locate(t)
        if frac == 0.0:
            return self.values[k]
        if frac == 1.0:
            return self.values[k + 1]
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]


@dataclass(frozen=True)
class AffinePolicy:
    """Time-varying affine feedback u(x, t) = u*(t) + K(t) (x - x*(t))."""

    grid: TimeGrid
    x_star: Trajectory
    u_star: Trajectory
    gains: np.ndarray  # (n_nodes, nu, nx)

    def __post_init__(self) -> None:
        gains = _readonly(self.gains)
        n, nu, nx = gains.shape
        if n != self.grid.n_nodes:
            raise ValueError("gain count must match grid nodes")
        if nu != self.u_star.dim or nx != self.x_star.dim:
            raise ValueError(
                f"gain shape {gains.shape} inconsistent with "
                f"nx={self.x_star.dim}, nu={self.u_star.dim}"
            )
        if not np.all(np.isfinite(gains)):
            raise ValueError("gain matrices must be finite")
        object.__setattr__(self, "gains", gains)

    @property
    def nx(self) -> int:
        return self.x_star.dim

    @property
    def nu(self) -> int:
        return self.u_star.dim

    def gain_at(self, t: float) -> np.ndarray:
        k, frac = self.grid.locate(t)
        if frac == 0.0:
            return self.gains[k]
        if frac == 1.0:
            return self.gains[k + 1]
        return (1.0 - frac) * self.gains[k] + frac * self.gains[k + 1]

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nx,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.nx},)")
        return self.u_star.at(t) + self.gain_at(t) @ (x - self.x_star.at(t))

    @classmethod
    def constant(cls, grid: TimeGrid, x_ref: np.ndarray, u_ref: np.ndarray) -> "AffinePolicy":
        """Zero-gain policy holding a constant input around a constant state."""
        x_ref = np.asarray(x_ref, dtype=float)
        u_ref = np.asarray(u_ref, dtype=float)
        n = grid.n_nodes
        return cls(
            grid=grid,
            x_star=Trajectory(grid, np.tile(x_ref, (n, 1))),
            u_star=Trajectory(grid, np.tile(u_ref, (n, 1))),
            gains=np.zeros((n, u_ref.size, x_ref.size)),
        )


def interpolate_policy(policy: AffinePolicy, x: np.ndarray, t: float) -> np.ndarray:
    """Evaluate the affine feedback policy at a state and time."""
    return policy.evaluate(x, t)


@dataclass(frozen=True)
class ModeSchedule:
    """Piecewise-constant contact flags over right-open time intervals.

    ``modes[i]`` is active on [switch_times[i-1], switch_times[i]); the first
    mode extends to -inf and the last to +inf.
    """

    switch_times: tuple[float, ...]
    modes: tuple[tuple[bool, ...], ...]

    def __post_init__(self) -> None:
        if len(self.modes) != len(self.switch_times) + 1:
            raise ValueError(
                f"need {len(self.switch_times) + 1} modes for "
                f"{len(self.switch_times)} switch times, got {len(self.modes)}"
            )
        if any(b <= a for a, b in zip(self.switch_times, self.switch_times[1:])):
            raise ValueError("switch times must be strictly increasing")

    def mode_at(self, t: float) -> tuple[bool, ...]:
        return self.modes[bisect.bisect_right(self.switch_times, t)]

    def snapped_to(self, grid: TimeGrid) -> "ModeSchedule":
        """Snap every switch time to the nearest grid node.

        Switches that collapse onto the same node are merged, keeping the
        latest mode, so constraint dimensions never change inside a grid
        interval.
        """
        times: list[float] = []
        modes: list[tuple[bool, ...]] = [self.modes[0]]
        for t_sw, mode in zip(self.switch_times, self.modes[1:]):
            k = int(round((t_sw - grid.t0) / grid.dt))
            k = min(max(k, 0), grid.n_nodes - 1)
            snapped = grid.t0 + k * grid.dt
            if times and snapped <= times[-1]:
                modes[-1] = mode
            else:
                times.append(snapped)
                modes.append(mode)
        return ModeSchedule(tuple(times), tuple(modes))


@dataclass(frozen=True)
class CostQuadratic:
    """Second-order cost model around a nominal point.

    L(x+dx, u+du) ~ q0 + q.dx + r.du + 0.5 dx.Q.dx + 0.5 du.R.du + du.P.dx
    """

    q0: float
    q: np.ndarray
    r: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class LqNode:
    """LQ problem data at one grid node."""

    A: np.ndarray
    B: np.ndarray
    q0: float
    q: np.ndarray
    r: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    C: np.ndarray  # (nc, nx)
    D: np.ndarray  # (nc, nu), full row rank where nc > 0
    e: np.ndarray  # (nc,)


@dataclass(frozen=True)
class LqProblem:
    """Per-node LQ approximation plus the terminal quadratic cost."""

    grid: TimeGrid
    nodes: tuple[LqNode, ...]
    terminal_q0: float
    terminal_q: np.ndarray
    terminal_Q: np.ndarray

    @property
    def nx(self) -> int:
        return self.nodes[0].A.shape[0]

    @property
    def nu(self) -> int:
        return self.nodes[0].B.shape[1]


# ---------------------------------------------------------------------------
# Finite differences


def fd_step(v: np.ndarray, base: float = 1e-6) -> np.ndarray:
    """Central-difference step scaled by the magnitude of each coordinate."""
    return base * np.maximum(1.0, np.abs(v))


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, base: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    steps = fd_step(x, base)
    f0 = np.atleast_1d(np.asarray(fn(x), dtype=float))
    jac = np.zeros((f0.size, x.size))
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += steps[i]
        xm[i] -= steps[i]
        jac[:, i] = (np.atleast_1d(fn(xp)) - np.atleast_1d(fn(xm))) / (2.0 * steps[i])
    return jac


def fd_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, base: float = 1e-6) -> np.ndarray:
    return fd_jacobian(lambda v: np.array([fn(v)]), x, base)[0]


def fd_hessian(fn: Callable[[np.ndarray], float], x: np.ndarray, base: float = 1e-4) -> np.ndarray:
    """Second differences of a scalar; larger default step than the gradient
    path since roundoff grows with 1/step^2."""
    hess = fd_jacobian(lambda v: fd_gradient(fn, v, base), x, base)
    return 0.5 * (hess + hess.T)


# ---------------------------------------------------------------------------
# OCP definition


@dataclass(frozen=True)
class OcpDefinition:
    """Continuous-time optimal control problem with derivative access.

    Only ``dynamics``, ``running_cost`` and ``terminal_cost`` are mandatory;
    analytic derivative callbacks are optional and fall back to central
    finite differences. All callbacks take plain numpy vectors.

    Callback signatures:
      dynamics(x, u, t) -> xdot
      dynamics_jacobians(x, u, t) -> (A, B)
      running_cost(x, u, t) -> float
      running_cost_quadratic(x, u, t) -> CostQuadratic
      terminal_cost(x) -> float
      terminal_cost_quadratic(x) -> (q0, q, Q)
      eq_constraints(x, u, t) -> g1 values            (state-input equality)
      eq_constraint_jacobians(x, u, t) -> (C, D)
      state_eq_constraints(x, t) -> g2 values         (state-only equality)
      state_eq_constraint_jacobian(x, t) -> J
      inequalities(x, u, t) -> h values, feasible when h >= 0
      inequality_derivatives(x, u, t) -> (h, grads (m, nx+nu), hessians (m, nx+nu, nx+nu))
    """

    nx: int
    nu: int
    dynamics: Callable
    running_cost: Callable
    terminal_cost: Callable
    dynamics_jacobians: Optional[Callable] = None
    running_cost_quadratic: Optional[Callable] = None
    terminal_cost_quadratic: Optional[Callable] = None
    eq_constraints: Optional[Callable] = None
    eq_constraint_jacobians: Optional[Callable] = None
    state_eq_constraints: Optional[Callable] = None
    state_eq_constraint_jacobian: Optional[Callable] = None
    inequalities: Optional[Callable] = None
    inequality_derivatives: Optional[Callable] = None
    barrier: Optional[BarrierConfig] = None
    mode_schedule: Optional[ModeSchedule] = None
    state_sampler: Optional[Callable] = None
    input_sampler: Optional[Callable] = None

    # -- evaluation with finite-difference fallbacks ------------------------

    def eval_dynamics_jacobians(self, x, u, t):
        if self.dynamics_jacobians is not None:
            return self.dynamics_jacobians(x, u, t)
        A = fd_jacobian(lambda v: self.dynamics(v, u, t), x)
        B = fd_jacobian(lambda v: self.dynamics(x, v, t), u)
        return A, B

    def eval_running_cost_quadratic(self, x, u, t) -> CostQuadratic:
        if self.running_cost_quadratic is not None:
            return self.running_cost_quadratic(x, u, t)
        z = np.concatenate([x, u])
        nx = self.nx

        def cost_z(v):
            return self.running_cost(v[:nx], v[nx:], t)

        grad = fd_gradient(cost_z, z)
        hess = fd_hessian(cost_z, z)
        return CostQuadratic(
            q0=float(self.running_cost(x, u, t)),
            q=grad[:nx],
            r=grad[nx:],
            Q=hess[:nx, :nx],
            R=hess[nx:, nx:],
            P=hess[nx:, :nx],
        )

    def eval_terminal_cost_quadratic(self, x):
        if self.terminal_cost_quadratic is not None:
            return self.terminal_cost_quadratic(x)
        q0 = float(self.terminal_cost(x))
        q = fd_gradient(self.terminal_cost, x)
        Q = fd_hessian(self.terminal_cost, x)
        return q0, q, Q

    def eval_eq_constraint_jacobians(self, x, u, t):
        if self.eq_constraint_jacobians is not None:
            return self.eq_constraint_jacobians(x, u, t)
        C = fd_jacobian(lambda v: self.eq_constraints(v, u, t), x)
        D = fd_jacobian(lambda v: self.eq_constraints(x, v, t), u)
        return C, D

    def eval_state_eq_jacobian(self, x, t):
        if self.state_eq_constraint_jacobian is not None:
            return self.state_eq_constraint_jacobian(x, t)
        return fd_jacobian(lambda v: self.state_eq_constraints(v, t), x)

    def eval_inequality_derivatives(self, x, u, t):
        if self.inequality_derivatives is not None:
            return self.inequality_derivatives(x, u, t)
        z = np.concatenate([x, u])
        nx = self.nx

        def h_z(v):
            return np.atleast_1d(self.inequalities(v[:nx], v[nx:], t))

        values = h_z(z)
        grads = fd_jacobian(h_z, z)
        hessians = np.stack(
            [fd_hessian(lambda v, i=i: float(h_z(v)[i]), z) for i in range(values.size)]
        ) if values.size else np.zeros((0, z.size, z.size))
        return values, grads, hessians

    def sample_state(self, rng: np.random.Generator) -> np.ndarray:
        if self.state_sampler is not None:
            return self.state_sampler(rng)
        return rng.standard_normal(self.nx)

    def sample_input(self, rng: np.random.Generator) -> np.ndarray:
        if self.input_sampler is not None:
            return self.input_sampler(rng)
        return rng.standard_normal(self.nu)


# ---------------------------------------------------------------------------
# Derivative checking


@dataclass(frozen=True)
class DerivativeReport:
    """Max relative error of each analytic derivative against central FD."""

    max_errors: dict[str, float]
    samples: int

    def ok(self, tol: float = 1e-4) -> bool:
        return all(err < tol for err in self.max_errors.values())

    def worst(self) -> tuple[str, float]:
        name = max(self.max_errors, key=self.max_errors.get)
        return name, self.max_errors[name]


def _rel_err(analytic: np.ndarray, reference: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=float)
    reference = np.asarray(reference, dtype=float)
    denom = max(1.0, float(np.max(np.abs(analytic))) if analytic.size else 1.0)
    diff = float(np.max(np.abs(analytic - reference))) if analytic.size else 0.0
    return diff / denom


def check_derivatives(
    ocp: OcpDefinition,
    samples: int = 10,
    seed: int = 0,
    times: Optional[Sequence[float]] = None,
) -> DerivativeReport:
    """Compare analytic derivatives against central finite differences.

    Jacobians and gradients are differenced from the value callbacks with a
    magnitude-scaled 1e-6 step; Hessians are differenced from the analytic
    gradient path. Raises on non-finite callback output.
    """
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}

    def record(name: str, err: float) -> None:
        errors[name] = max(errors.get(name, 0.0), err)

    for i in range(samples):
        x = ocp.sample_state(rng)
        u = ocp.sample_input(rng)
        if times is not None and len(times):
            t = float(times[i % len(times)])
        else:
            t = float(rng.uniform(0.0, 1.0))

        xdot = np.asarray(ocp.dynamics(x, u, t), dtype=float)
        if not np.all(np.isfinite(xdot)):
            raise ValueError(f"dynamics returned non-finite output at sample {i}")
        A, B = ocp.eval_dynamics_jacobians(x, u, t)
        record("dynamics/A", _rel_err(A, fd_jacobian(lambda v: ocp.dynamics(v, u, t), x)))
        record("dynamics/B", _rel_err(B, fd_jacobian(lambda v: ocp.dynamics(x, v, t), u)))

        quad = ocp.eval_running_cost_quadratic(x, u, t)
        record("cost/q", _rel_err(quad.q, fd_gradient(lambda v: ocp.running_cost(v, u, t), x)))
        record("cost/r", _rel_err(quad.r, fd_gradient(lambda v: ocp.running_cost(x, v, t), u)))
        record(
            "cost/Q",
            _rel_err(quad.Q, fd_jacobian(lambda v: ocp.eval_running_cost_quadratic(v, u, t).q, x)),
        )
        record(
            "cost/R",
            _rel_err(quad.R, fd_jacobian(lambda v: ocp.eval_running_cost_quadratic(x, v, t).r, u)),
        )
        record(
            "cost/P",
            _rel_err(quad.P, fd_jacobian(lambda v: ocp.eval_running_cost_quadratic(x, v, t).q, u).T),
        )

        q0f, qf, Qf = ocp.eval_terminal_cost_quadratic(x)
        record("terminal/q", _rel_err(qf, fd_gradient(ocp.terminal_cost, x)))
        record(
            "terminal/Q",
            _rel_err(Qf, fd_jacobian(lambda v: ocp.eval_terminal_cost_quadratic(v)[1], x)),
        )

        if ocp.eq_constraints is not None:
            g1 = np.atleast_1d(ocp.eq_constraints(x, u, t))
            if g1.size:
                if not np.all(np.isfinite(g1)):
                    raise ValueError(f"equality constraints non-finite at sample {i}")
                C, D = ocp.eval_eq_constraint_jacobians(x, u, t)
                record(
                    "eq/C", _rel_err(C, fd_jacobian(lambda v: ocp.eq_constraints(v, u, t), x))
                )
                record(
                    "eq/D", _rel_err(D, fd_jacobian(lambda v: ocp.eq_constraints(x, v, t), u))
                )

        if ocp.state_eq_constraints is not None:
            g2 = np.atleast_1d(ocp.state_eq_constraints(x, t))
            if g2.size:
                J = ocp.eval_state_eq_jacobian(x, t)
                record(
                    "state_eq/J",
                    _rel_err(J, fd_jacobian(lambda v: ocp.state_eq_constraints(v, t), x)),
                )

        if ocp.inequalities is not None:
            h = np.atleast_1d(ocp.inequalities(x, u, t))
            if h.size:
                values, grads, hessians = ocp.eval_inequality_derivatives(x, u, t)
                z = np.concatenate([x, u])
                nx = ocp.nx
                fd_g = fd_jacobian(
                    lambda v: np.atleast_1d(ocp.inequalities(v[:nx], v[nx:], t)), z
                )
                record("ineq/grad", _rel_err(grads, fd_g))
                fd_h = np.stack(
                    [
                        fd_jacobian(
                            lambda v, i=i: ocp.eval_inequality_derivatives(v[:nx], v[nx:], t)[1][i],
                            z,
                        )
                        for i in range(values.size)
                    ]
                )
                record("ineq/hess", _rel_err(hessians, fd_h))

    return DerivativeReport(max_errors=errors, samples=samples)


# ---------------------------------------------------------------------------
# LQ assembly


def regularize_input_hessian(R: np.ndarray) -> np.ndarray:
    """Symmetrize and lift R along the ladder until eigmin >= 1e-8."""
    R = 0.5 * (R + R.T)
    floor = EIG_FLOOR * np.eye(R.shape[0])
    try:
        # fast path: Cholesky of R - floor succeeding certifies eigmin >= floor
        np.linalg.cholesky(R - floor)
        return R
    except np.linalg.LinAlgError:
        pass
    for lam in REGULARIZATION_LADDER[1:]:
        candidate = R + lam * np.eye(R.shape[0])
        if np.linalg.eigvalsh(candidate)[0] >= EIG_FLOOR:
            return candidate
    raise ValueError("input-cost Hessian could not be regularized to positive definite")


def _check_constraint_rank(D: np.ndarray, t: float) -> None:
    if D.shape[0] == 0:
        return
    sv = np.linalg.svd(D, compute_uv=False)
    if sv[-1] <= 1e-8 * sv[0] or sv[0] == 0.0:
        raise ConstraintRankError(
            f"equality-constraint input Jacobian rank-deficient at t={t:.4f} "
            f"({D.shape[0]} rows, smallest singular value {sv[-1]:.2e})"
        )


def build_lq_problem(
    ocp: OcpDefinition,
    x_traj: Trajectory,
    u_traj: Trajectory,
    state_penalty: float = 0.0,
) -> LqProblem:
    """Linear-quadratic approximation around a nominal trajectory pair.

    The cost quadratization includes the second-order barrier terms of every
    inequality and, when ``state_penalty`` > 0, a Gauss-Newton quadratization
    of the state-only equality penalty rho*||g2||^2. R is symmetrized and
    regularized so the backward pass can factorize it.
    """
    if x_traj.grid is not u_traj.grid and x_traj.grid != u_traj.grid:
        raise ValueError("state and input trajectories must share a grid")
    grid = x_traj.grid
    nodes = []
    for k, t in enumerate(grid.times):
        x = x_traj.values[k]
        u = u_traj.values[k]
        A, B = ocp.eval_dynamics_jacobians(x, u, t)
        quad = ocp.eval_running_cost_quadratic(x, u, t)

        if ocp.inequalities is not None and ocp.barrier is not None:
            h, grads, hessians = ocp.eval_inequality_derivatives(x, u, t)
            quad = augment_cost(quad, h, grads, hessians, ocp.barrier, ocp.nx)

        q0, q, r, Q, P = quad.q0, quad.q, quad.r, quad.Q, quad.P
        if state_penalty > 0.0 and ocp.state_eq_constraints is not None:
            g2 = np.atleast_1d(ocp.state_eq_constraints(x, t))
            if g2.size:
                J = ocp.eval_state_eq_jacobian(x, t)
                q0 = q0 + state_penalty * float(g2 @ g2)
                q = q + 2.0 * state_penalty * J.T @ g2
                Q = Q + 2.0 * state_penalty * J.T @ J

        if ocp.eq_constraints is not None:
            e = np.atleast_1d(np.asarray(ocp.eq_constraints(x, u, t), dtype=float))
            if e.size:
                C, D = ocp.eval_eq_constraint_jacobians(x, u, t)
                C = np.atleast_2d(np.asarray(C, dtype=float))
                D = np.atleast_2d(np.asarray(D, dtype=float))
            else:
                C = np.zeros((0, ocp.nx))
                D = np.zeros((0, ocp.nu))
        else:
            e = np.zeros(0)
            C = np.zeros((0, ocp.nx))
            D = np.zeros((0, ocp.nu))
        _check_constraint_rank(D, t)

        R = regularize_input_hessian(quad.R)
        node = LqNode(
            A=np.asarray(A, dtype=float),
            B=np.asarray(B, dtype=float),
            q0=float(q0),
            q=np.asarray(q, dtype=float),
            r=np.asarray(r, dtype=float),
            Q=0.5 * (Q + Q.T),
            R=R,
            P=np.asarray(P, dtype=float),
            C=C,
            D=D,
            e=e,
        )
        for name, arr in (("A", node.A), ("B", node.B), ("Q", node.Q), ("R", node.R)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite {name} matrix at node {k} (t={t:.4f})")
        nodes.append(node)

    q0f, qf, Qf = ocp.eval_terminal_cost_quadratic(x_traj.values[-1])
    return LqProblem(
        grid=grid,
        nodes=tuple(nodes),
        terminal_q0=float(q0f),
        terminal_q=np.asarray(qf, dtype=float),
        terminal_Q=0.5 * (np.asarray(Qf) + np.asarray(Qf).T),
    )
