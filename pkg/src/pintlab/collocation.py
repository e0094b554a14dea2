"""Lobatto IIIA collocation, IMEX-SDC sweeps, serial SDC and two-level MLSDC.

One time step of size dt is discretized by m Lobatto nodes on [0, 1]
(endpoints included).  ``Q`` holds 0-to-node integrals of the Lagrange
basis, so the collocation system reads ``U = u0 + dt * Q F(U)`` rowwise.
SDC solves it by sweeping with lower-triangular approximations: an
implicit-Euler-type ``QD_I`` for the stiff diagonal part and an
explicit-Euler-type strictly-lower ``QD_E`` for the rest.

MLSDC couples a fine and a coarse level (space via Fourier transfer, time
via Lagrange interpolation between node sets) through an FAS correction
``tau = dt * (R Q_f F_f(u_f) - Q_c F_c(R u_f))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import CostTally, InnerSolve, ProblemSpec, implicit_solve_hat
from .spectral import GridPair, SpectralField, interpolate_hat, restrict_hat

__all__ = [
    "LobattoNewtonError",
    "CollocationTable",
    "SweepState",
    "lobatto_table",
    "node_transfer_matrix",
    "init_sweep_state",
    "sdc_sweep",
    "sdc_residual",
    "sdc_solve_step",
    "mlsdc_solve_step",
    "SdcStepResult",
    "MlsdcStepResult",
]


class LobattoNewtonError(RuntimeError):
    """Newton iteration for the Lobatto nodes failed to converge."""


@dataclass(frozen=True)
class CollocationTable:
    m: int
    nodes: np.ndarray          # m points in [0, 1], endpoints included
    q: np.ndarray              # (m, m): Q[j, l] = int_0^{tau_j} L_l
    qd_imp: np.ndarray         # lower-triangular implicit-Euler approximation
    qd_exp: np.ndarray         # strictly-lower explicit-Euler approximation
    weights: np.ndarray        # quadrature weights (= last row of q)


def _legendre_dp(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P_n'(x) and P_n''(x) on interior points of (-1, 1)."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    dp = n * (x * p1 - p0) / (x**2 - 1.0)
    ddp = (2.0 * x * dp - n * (n + 1) * p1) / (1.0 - x**2)
    return dp, ddp


_TABLES: dict[int, CollocationTable] = {}


def lobatto_table(m: int) -> CollocationTable:
    """Build (and cache) the m-node Lobatto IIIA table on [0, 1]."""
    table = _TABLES.get(m)
    if table is not None:
        return table
    if m < 2:
        raise ValueError("need at least 2 Lobatto nodes")

    x = np.array([], dtype=float)
    if m > 2:
        # interior nodes: roots of P'_{m-1}; Chebyshev points start Newton
        x = -np.cos(np.pi * np.arange(1, m - 1) / (m - 1))
        for it in range(100):
            dp, ddp = _legendre_dp(m - 1, x)
            dx = dp / ddp
            x = x - dx
            if np.max(np.abs(dx)) < 1e-15:
                break
        else:
            raise LobattoNewtonError(f"no convergence for m={m}")
        dp, _ = _legendre_dp(m - 1, x)
        if np.max(np.abs(dp)) > 1e-12:
            raise LobattoNewtonError(f"inaccurate roots for m={m}")
    nodes = np.concatenate(([0.0], (x + 1.0) / 2.0, [1.0]))

    q = np.zeros((m, m))
    gx, gw = np.polynomial.legendre.leggauss(m + 4)
    for j in range(m):
        hi = nodes[j]
        s = 0.5 * hi * (gx + 1.0)
        w = 0.5 * hi * gw
        for l in range(m):
            q[j, l] = np.sum(w * _lagrange(nodes, l, s))

    dtau = np.diff(nodes)
    qd_imp = np.zeros((m, m))
    qd_exp = np.zeros((m, m))
    for j in range(1, m):
        qd_imp[j, 1:j + 1] = dtau[:j]
        qd_exp[j, 0:j] = dtau[:j]

    table = CollocationTable(m=m, nodes=nodes, q=q, qd_imp=qd_imp,
                             qd_exp=qd_exp, weights=q[-1].copy())
    _TABLES[m] = table
    return table


def _lagrange(nodes: np.ndarray, l: int, s: np.ndarray) -> np.ndarray:
    out = np.ones_like(s)
    for i, tau in enumerate(nodes):
        if i != l:
            out *= (s - tau) / (nodes[l] - tau)
    return out


def node_transfer_matrix(src_nodes: np.ndarray, dst_nodes: np.ndarray) -> np.ndarray:
    """Lagrange interpolation matrix from one node set to another.

    Exact for polynomials up to degree len(src)-1; the identity when the
    node sets coincide.
    """
    if src_nodes.shape == dst_nodes.shape and np.allclose(src_nodes, dst_nodes,
                                                          atol=1e-14):
        return np.eye(len(src_nodes))
    mat = np.empty((len(dst_nodes), len(src_nodes)))
    for l in range(len(src_nodes)):
        mat[:, l] = _lagrange(src_nodes, l, dst_nodes)
    return mat


# ---------------------------------------------------------------------------
# sweep state
# ---------------------------------------------------------------------------


@dataclass
class SweepState:
    """Per-node solution values and cached rhs evaluations for one step.

    ``u[0]`` always equals the step's left endpoint value (Lobatto).
    Single-owner mutable: one state per time slice, never shared.
    """

    u0: np.ndarray          # (n,)
    u: np.ndarray           # (m, n)
    f_imp: np.ndarray       # (m, n): lambda * u per node
    f_exp: np.ndarray       # (m, n)
    dt: float

    @property
    def m(self) -> int:
        return self.u.shape[0]

    def endpoint(self) -> np.ndarray:
        return self.u[-1]

    def copy(self) -> "SweepState":
        return SweepState(self.u0.copy(), self.u.copy(), self.f_imp.copy(),
                          self.f_exp.copy(), self.dt)


def init_sweep_state(problem: ProblemSpec, u0_hat: np.ndarray, dt: float,
                     m: int, tally: CostTally | None = None) -> SweepState:
    """Spread the initial value to all nodes (the COPY predictor)."""
    lam = problem.implicit_symbol(u0_hat.shape[-1])
    f_e = problem.explicit_rhs_hat(u0_hat)
    if tally is not None:
        tally.explicit_evals += 1
    u = np.tile(u0_hat, (m, 1))
    return SweepState(
        u0=u0_hat.copy(),
        u=u,
        f_imp=lam * u,
        f_exp=np.tile(f_e, (m, 1)),
        dt=dt,
    )


def refresh_initial_value(state: SweepState, problem: ProblemSpec,
                          u0_hat: np.ndarray,
                          tally: CostTally | None = None) -> SweepState:
    """Install a new left-endpoint value, keeping interior node values."""
    lam = problem.implicit_symbol(u0_hat.shape[-1])
    out = state.copy()
    out.u0 = u0_hat.copy()
    out.u[0] = u0_hat
    out.f_imp[0] = lam * u0_hat
    # explicit rhs at node 0 must stay consistent with u[0]
    out.f_exp[0] = problem.explicit_rhs_hat(u0_hat)
    if tally is not None:
        tally.explicit_evals += 1
    return out


def sdc_sweep(state: SweepState, problem: ProblemSpec, table: CollocationTable,
              tau: np.ndarray | None = None,
              inner: InnerSolve | None = None,
              tally: CostTally | None = None) -> SweepState:
    """One IMEX sweep: node-by-node update with QD_I implicit / QD_E explicit
    and the full Q term of the previous iterate as deferred-correction rhs."""
    m = table.m
    dt = state.dt
    lam = problem.implicit_symbol(state.u0.shape[-1])
    q_imp_old = (table.q - table.qd_imp) @ state.f_imp
    q_exp_old = (table.q - table.qd_exp) @ state.f_exp

    new = state.copy()
    for j in range(1, m):
        acc = state.u0 + dt * (q_imp_old[j] + q_exp_old[j])
        if tau is not None:
            acc = acc + tau[j]
        for l in range(j):
            ae = table.qd_exp[j, l]
            if ae != 0.0:
                acc = acc + (dt * ae) * new.f_exp[l]
            ai = table.qd_imp[j, l]
            if ai != 0.0:
                acc = acc + (dt * ai) * new.f_imp[l]
        c = dt * table.qd_imp[j, j]
        u_j = implicit_solve_hat(lam, acc, c, inner=inner, tally=tally)
        new.u[j] = u_j
        new.f_imp[j] = lam * u_j
        new.f_exp[j] = problem.explicit_rhs_hat(u_j)
        if tally is not None:
            tally.explicit_evals += 1
    return new


def _phys_max(hat_rows: np.ndarray) -> float:
    from .spectral import ifft

    return float(np.max(np.abs(ifft(hat_rows))))


def sdc_residual(state: SweepState, table: CollocationTable,
                 tau: np.ndarray | None = None) -> float:
    """max over nodes of ||U_j - U_0 - dt * sum_l Q_jl F(U_l)||_inf."""
    integ = table.q @ (state.f_imp + state.f_exp)
    r = state.u - state.u0[None, :] - state.dt * integ
    if tau is not None:
        r = r - tau
    return _phys_max(r[1:])


@dataclass
class SdcStepResult:
    value: np.ndarray
    sweeps: int
    converged: bool
    residuals: list
    state: SweepState


def sdc_solve_step(problem: ProblemSpec, table: CollocationTable,
                   u0_hat: np.ndarray, dt: float, tol: float, max_sweeps: int,
                   inner: InnerSolve | None = None,
                   tally: CostTally | None = None) -> SdcStepResult:
    """Sweep one step until the collocation residual drops below tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    state = init_sweep_state(problem, u0_hat, dt, table.m, tally=tally)
    residuals = []
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        state = sdc_sweep(state, problem, table, inner=inner, tally=tally)
        sweeps += 1
        res = sdc_residual(state, table)
        residuals.append(res)
        if res < tol:
            converged = True
            break
    return SdcStepResult(value=state.endpoint().copy(), sweeps=sweeps,
                         converged=converged, residuals=residuals, state=state)


# ---------------------------------------------------------------------------
# two-level MLSDC
# ---------------------------------------------------------------------------


def fas_correction(problem: ProblemSpec, fine: SweepState,
                   fine_table: CollocationTable, coarse_table: CollocationTable,
                   r_time: np.ndarray, n_coarse: int,
                   coarse_problem: ProblemSpec | None = None,
                   tally_coarse: CostTally | None = None) -> tuple[np.ndarray, SweepState]:
    """Restrict a fine sweep state and build the FAS tau term.

    Returns ``(tau, coarse_state)`` where tau has shape (m_c, n_c).
    """
    cp = coarse_problem or problem
    dt = fine.dt
    # restrict node values: time first (node interpolation), then space
    u_c = restrict_hat(r_time @ fine.u, n_coarse)
    u0_c = restrict_hat(fine.u0, n_coarse)
    lam_c = cp.implicit_symbol(n_coarse)
    f_imp_c = lam_c * u_c
    f_exp_c = cp.explicit_rhs_hat(u_c)
    if tally_coarse is not None:
        tally_coarse.explicit_evals += u_c.shape[0]
    coarse = SweepState(u0=u0_c, u=u_c.copy(), f_imp=f_imp_c, f_exp=f_exp_c,
                        dt=dt)
    fine_int = fine_table.q @ (fine.f_imp + fine.f_exp)
    coarse_int = coarse_table.q @ (f_imp_c + f_exp_c)
    tau = dt * (restrict_hat(r_time @ fine_int, n_coarse) - coarse_int)
    return tau, coarse


def apply_coarse_correction(fine: SweepState, coarse_new: SweepState,
                            coarse_old_u: np.ndarray, p_time: np.ndarray,
                            n_fine: int) -> SweepState:
    """Interpolate the coarse increment and add it to the fine node values."""
    delta = coarse_new.u - coarse_old_u
    out = fine.copy()
    out.u = out.u + p_time @ interpolate_hat(delta, n_fine)
    out.u[0] = out.u0  # left endpoint is pinned
    return out


@dataclass
class MlsdcStepResult:
    value: np.ndarray
    iterations: int
    converged: bool
    residuals: list
    state: SweepState


def mlsdc_solve_step(problem: ProblemSpec, fine_table: CollocationTable,
                     coarse_table: CollocationTable, grids: GridPair,
                     u0_hat: np.ndarray, dt: float, tol: float, max_iters: int,
                     inner: InnerSolve | None = None,
                     tally_fine: CostTally | None = None,
                     tally_coarse: CostTally | None = None,
                     coarse_problem: ProblemSpec | None = None) -> MlsdcStepResult:
    """Two-level MLSDC: per iteration one FAS-corrected coarse sweep, the
    interpolated correction, then one fine sweep."""
    if u0_hat.shape[-1] != grids.fine:
        raise ValueError("initial value does not live on the fine grid")
    r_time = node_transfer_matrix(fine_table.nodes, coarse_table.nodes)
    p_time = node_transfer_matrix(coarse_table.nodes, fine_table.nodes)

    state = init_sweep_state(problem, u0_hat, dt, fine_table.m, tally=tally_fine)
    lam_f = problem.implicit_symbol(grids.fine)
    residuals = []
    iterations = 0
    converged = False
    while iterations < max_iters:
        tau, coarse = fas_correction(problem, state, fine_table, coarse_table,
                                     r_time, grids.coarse,
                                     coarse_problem=coarse_problem,
                                     tally_coarse=tally_coarse)
        coarse_old_u = coarse.u.copy()
        coarse = sdc_sweep(coarse, coarse_problem or problem, coarse_table,
                           tau=tau, inner=inner, tally=tally_coarse)
        state = apply_coarse_correction(state, coarse, coarse_old_u, p_time,
                                        grids.fine)
        # node values moved: refresh the cached fine rhs before sweeping
        # (node 0 is pinned, so its cache is still valid)
        state.f_imp = lam_f * state.u
        state.f_exp[1:] = problem.explicit_rhs_hat(state.u[1:])
        if tally_fine is not None:
            tally_fine.explicit_evals += fine_table.m - 1
        state = sdc_sweep(state, problem, fine_table, inner=inner,
                          tally=tally_fine)
        iterations += 1
        res = sdc_residual(state, fine_table)
        residuals.append(res)
        if res < tol:
            converged = True
            break
    return MlsdcStepResult(value=state.endpoint().copy(), iterations=iterations,
                           converged=converged, residuals=residuals,
                           state=state)
