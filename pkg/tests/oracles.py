"""Independent verification oracles for the solver tests.

These deliberately avoid the library's Riccati/rollout code paths:
discretization goes through the matrix exponential (Van Loan blocks) and the
backward recursion is a plain discrete-time dynamic program; the
transcription oracle minimizes its own rollout cost with scipy.
"""

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize


def vanloan_discretize(A, B, Q, R, dt):
    """Exact zero-order-hold discretization of dynamics and integral cost.

    Returns (Ad, Bd, Qd, Rd, Pd) such that the discrete-time problem matches
    the continuous one under piecewise-constant inputs.
    """
    nx, nu = B.shape
    nz = nx + nu
    Az = np.zeros((nz, nz))
    Az[:nx, :nx] = A
    Az[:nx, nx:] = B
    Qz = np.zeros((nz, nz))
    Qz[:nx, :nx] = Q
    Qz[nx:, nx:] = R
    H = np.zeros((2 * nz, 2 * nz))
    H[:nz, :nz] = -Az.T
    H[:nz, nz:] = Qz
    H[nz:, nz:] = Az
    E = expm(H * dt)
    M = E[nz:, nz:].T @ E[:nz, nz:]
    M = 0.5 * (M + M.T)
    Phi = expm(Az * dt)
    return Phi[:nx, :nx], Phi[:nx, nx:], M[:nx, :nx], M[nx:, nx:], M[nx:, :nx]


def discrete_lqr(Ad, Bd, Qd, Rd, Pd, Qf, n_nodes):
    """Finite-horizon discrete-time LQR via dynamic programming.

    Returns value matrices (n_nodes, nx, nx) with index 0 at the initial time
    and gains (n_nodes - 1, nu, nx).
    """
    S = 0.5 * (Qf + Qf.T)
    S_list = [S.copy()]
    K_list = []
    for _ in range(n_nodes - 1):
        Quu = Rd + Bd.T @ S @ Bd
        Qux = Pd + Bd.T @ S @ Ad
        Qxx = Qd + Ad.T @ S @ Ad
        K = -np.linalg.solve(Quu, Qux)
        S = Qxx + Qux.T @ K
        S = 0.5 * (S + S.T)
        S_list.append(S.copy())
        K_list.append(K.copy())
    S_list.reverse()
    K_list.reverse()
    return np.array(S_list), np.array(K_list)


def lqr_cost(S0, x0):
    return 0.5 * float(x0 @ S0 @ x0)


def transcription_rollout_cost(ocp, grid, x0, u_nodes, state_penalty=0.0):
    """Cost of the discretized problem: RK4 dynamics under linearly
    interpolated node inputs, trapezoidal quadrature of the barrier-augmented
    running cost, plus the terminal cost. Reimplemented here so the oracle
    shares no code with the solver's forward pass."""
    from slqmpc.barrier import barrier_penalty

    n = grid.n_nodes
    dt = grid.dt
    ts = grid.times
    xs = np.empty((n, ocp.nx))
    xs[0] = x0
    f = ocp.dynamics
    for k in range(n - 1):
        t = ts[k]
        u_a = u_nodes[k]
        u_b = u_nodes[k + 1]
        u_mid = 0.5 * (u_a + u_b)
        x = xs[k]
        k1 = f(x, u_a, t)
        k2 = f(x + 0.5 * dt * k1, u_mid, t + 0.5 * dt)
        k3 = f(x + 0.5 * dt * k2, u_mid, t + 0.5 * dt)
        k4 = f(x + dt * k3, u_b, ts[k + 1])
        xs[k + 1] = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    stage = np.empty(n)
    for k in range(n):
        c = float(ocp.running_cost(xs[k], u_nodes[k], ts[k]))
        if ocp.inequalities is not None and ocp.barrier is not None:
            h = np.atleast_1d(ocp.inequalities(xs[k], u_nodes[k], ts[k]))
            c += barrier_penalty(h, ocp.barrier)
        if ocp.state_eq_constraints is not None and state_penalty > 0.0:
            g2 = np.atleast_1d(ocp.state_eq_constraints(xs[k], ts[k]))
            c += state_penalty * float(g2 @ g2)
        stage[k] = c
    return float(np.trapezoid(stage, dx=dt) + ocp.terminal_cost(xs[-1]))


def solve_transcription(ocp, grid, x0, u_inits, state_penalty=0.0, maxiter=2000):
    """Dense direct solve of the discretized problem over the node inputs.

    ``u_inits`` is one (n_nodes, nu) guess or a list of guesses; the best
    converged point wins, which guards against BFGS stalling far from the
    optimum on barrier-shaped landscapes.
    """
    n = grid.n_nodes
    nu = ocp.nu

    def objective(z):
        return transcription_rollout_cost(
            ocp, grid, x0, z.reshape(n, nu), state_penalty
        )

    guesses = u_inits if isinstance(u_inits, (list, tuple)) else [u_inits]
    best = None
    for guess in guesses:
        result = minimize(
            objective,
            np.asarray(guess, dtype=float).reshape(-1),
            method="BFGS",
            options={"maxiter": maxiter, "gtol": 1e-10},
        )
        if best is None or result.fun < best.fun:
            best = result
    return best.fun, best.x.reshape(n, nu), best
