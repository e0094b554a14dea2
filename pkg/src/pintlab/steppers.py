"""Serial one-step time integrators.

Five schemes, all operating on Fourier coefficients of a ProblemSpec whose
implicit part is diagonal:

* ``imex_euler``    -- first-order IMEX Euler (1 explicit eval / step)
* ``imex_rk2``      -- the (2,2,2) scheme of Ascher-Ruuth-Spiteri,
                       gamma = 1 - 1/sqrt(2) (2 evals)
* ``ark4``          -- Kennedy-Carpenter ARK4(3)6L[2]SA, 6-stage additive
                       4th order (6 evals)
* ``etd1``          -- exponential Euler (1 eval)
* ``erk4_krogstad`` -- Krogstad's 4-stage exponential RK4 (4 evals)

The tableau coefficients below are the single source of truth for this
repo; docs/tableaus.md renders them for reference.  ``cost_units`` counts
explicit right-hand-side evaluations per step, the dominant cost, and is
what the speedup estimators consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .problems import CostTally, InnerSolve, ProblemSpec, implicit_solve_hat
from .spectral import SpectralField

__all__ = [
    "StepperSpec",
    "PhiTable",
    "get_stepper",
    "stepper_names",
    "phi_eval",
    "phi_table",
    "step",
    "step_hat",
    "integrate",
    "IntegrateResult",
]


@dataclass(frozen=True)
class StepperSpec:
    scheme: str
    nominal_order: int
    cost_units: int

    def __post_init__(self):
        if self.nominal_order not in (1, 2, 4):
            raise ValueError("nominal_order must be 1, 2 or 4")
        if self.cost_units <= 0:
            raise ValueError("cost_units must be positive")


_STEPPERS = {
    "imex_euler": StepperSpec("imex_euler", 1, 1),
    "imex_rk2": StepperSpec("imex_rk2", 2, 2),
    "ark4": StepperSpec("ark4", 4, 6),
    "etd1": StepperSpec("etd1", 1, 1),
    "erk4_krogstad": StepperSpec("erk4_krogstad", 4, 4),
}


def get_stepper(name: str) -> StepperSpec:
    try:
        return _STEPPERS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown scheme {name!r}; choose from "
                       f"{sorted(_STEPPERS)}") from None


def stepper_names() -> list[str]:
    return sorted(_STEPPERS)


# ---------------------------------------------------------------------------
# IMEX tableaus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ImexTableau:
    a_exp: tuple
    b_exp: tuple
    a_imp: tuple
    b_imp: tuple

    @property
    def stages(self) -> int:
        return len(self.b_exp)


def _ars222() -> _ImexTableau:
    g = 1.0 - 1.0 / math.sqrt(2.0)
    d = 1.0 - 1.0 / (2.0 * g)
    return _ImexTableau(
        a_exp=((0.0, 0.0, 0.0), (g, 0.0, 0.0), (d, 1.0 - d, 0.0)),
        b_exp=(d, 1.0 - d, 0.0),
        a_imp=((0.0, 0.0, 0.0), (0.0, g, 0.0), (0.0, 1.0 - g, g)),
        b_imp=(0.0, 1.0 - g, g),
    )


def _imex_euler_tableau() -> _ImexTableau:
    return _ImexTableau(
        a_exp=((0.0, 0.0), (1.0, 0.0)),
        b_exp=(1.0, 0.0),
        a_imp=((0.0, 0.0), (0.0, 1.0)),
        b_imp=(0.0, 1.0),
    )


def _ark436l2sa() -> _ImexTableau:
    # Kennedy & Carpenter ARK4(3)6L[2]SA; shared b, stiffly accurate ESDIRK
    b = (82889.0 / 524892.0, 0.0, 15625.0 / 83664.0, 69875.0 / 102672.0,
         -2260.0 / 8211.0, 1.0 / 4.0)
    a_exp = (
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        (1.0 / 2.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        (13861.0 / 62500.0, 6889.0 / 62500.0, 0.0, 0.0, 0.0, 0.0),
        (-116923316275.0 / 2393684061468.0, -2731218467317.0 / 15368042101831.0,
         9408046702089.0 / 11113171139209.0, 0.0, 0.0, 0.0),
        (-451086348788.0 / 2902428689909.0, -2682348792572.0 / 7519795681897.0,
         12662868775082.0 / 11960479115383.0, 3355817975965.0 / 11060851509271.0,
         0.0, 0.0),
        (647845179188.0 / 3216320057751.0, 73281519250.0 / 8382639484533.0,
         552539513391.0 / 3454668386233.0, 3354512671639.0 / 8306763924573.0,
         4040.0 / 17871.0, 0.0),
    )
    a_imp = (
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        (1.0 / 4.0, 1.0 / 4.0, 0.0, 0.0, 0.0, 0.0),
        (8611.0 / 62500.0, -1743.0 / 31250.0, 1.0 / 4.0, 0.0, 0.0, 0.0),
        (5012029.0 / 34652500.0, -654441.0 / 2922500.0, 174375.0 / 388108.0,
         1.0 / 4.0, 0.0, 0.0),
        (15267082809.0 / 155376265600.0, -71443401.0 / 120774400.0,
         730878875.0 / 902184768.0, 2285395.0 / 8070912.0, 1.0 / 4.0, 0.0),
        b[:5] + (1.0 / 4.0,),
    )
    return _ImexTableau(a_exp=a_exp, b_exp=b, a_imp=a_imp, b_imp=b)


_TABLEAUS = {
    "imex_euler": _imex_euler_tableau(),
    "imex_rk2": _ars222(),
    "ark4": _ark436l2sa(),
}


def _needs_explicit(tab: _ImexTableau) -> tuple:
    s = tab.stages
    need = []
    for j in range(s):
        used = tab.b_exp[j] != 0.0 or any(tab.a_exp[i][j] != 0.0
                                          for i in range(j + 1, s))
        need.append(used)
    return tuple(need)


_NEEDS_EXPLICIT = {k: _needs_explicit(t) for k, t in _TABLEAUS.items()}


# ---------------------------------------------------------------------------
# phi functions
# ---------------------------------------------------------------------------

_PHI_SMALL = 0.25
_PHI_TERMS = 13


def phi_eval(z, j: int):
    """Evaluate ``phi_j`` (j in 0..3): phi_0 = exp, and
    ``phi_{j+1}(z) = (phi_j(z) - 1/j!) / z`` with phi_j(0) = 1/j!.

    Uses a 13-term Taylor series below |z| = 0.25 to dodge cancellation;
    above that the direct formula carries at most ~1e-13 relative error,
    below it the series truncation sits around 1e-17.  Accepts scalars or
    arrays.
    """
    if j not in (0, 1, 2, 3):
        raise ValueError("j must be in 0..3")
    z_arr = np.asarray(z, dtype=np.complex128)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    if j == 0:
        out = np.exp(z_arr)
        return complex(out[0]) if scalar else out

    small = np.abs(z_arr) < _PHI_SMALL
    safe = np.where(small, 1.0, z_arr)
    ez = np.exp(safe)
    if j == 1:
        direct = (ez - 1.0) / safe
    elif j == 2:
        direct = (ez - 1.0 - safe) / safe**2
    else:
        direct = (ez - 1.0 - safe - safe**2 / 2.0) / safe**3

    # Horner evaluation of sum_{k<13} z^k / (k+j)!
    taylor = np.full_like(z_arr, 1.0 / math.factorial(_PHI_TERMS - 1 + j))
    for k in range(_PHI_TERMS - 2, -1, -1):
        taylor = taylor * z_arr + 1.0 / math.factorial(k + j)
    out = np.where(small, taylor, direct)
    return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class PhiTable:
    """Precomputed exponential/phi factors of ``dt*lam`` (and ``dt*lam/2``)."""

    exp_full: np.ndarray
    phi1_full: np.ndarray
    phi2_full: np.ndarray
    phi3_full: np.ndarray
    exp_half: np.ndarray | None = None
    phi1_half: np.ndarray | None = None
    phi2_half: np.ndarray | None = None


def phi_table(lam: np.ndarray, dt: float, scheme: str) -> PhiTable:
    z = dt * lam
    if scheme == "etd1":
        return PhiTable(exp_full=np.exp(z), phi1_full=phi_eval(z, 1),
                        phi2_full=phi_eval(z, 2), phi3_full=phi_eval(z, 3))
    zh = 0.5 * z
    return PhiTable(
        exp_full=np.exp(z), phi1_full=phi_eval(z, 1),
        phi2_full=phi_eval(z, 2), phi3_full=phi_eval(z, 3),
        exp_half=np.exp(zh), phi1_half=phi_eval(zh, 1),
        phi2_half=phi_eval(zh, 2),
    )


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def step_hat(stepper: StepperSpec, problem: ProblemSpec, u_hat: np.ndarray,
             t: float, dt: float, *, inner: InnerSolve | None = None,
             tally: CostTally | None = None,
             phi: PhiTable | None = None) -> np.ndarray:
    """One step of the named scheme on a Fourier coefficient array."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    lam = problem.implicit_symbol(u_hat.shape[-1])
    name = stepper.scheme
    if name in _TABLEAUS:
        return _imex_step(_TABLEAUS[name], _NEEDS_EXPLICIT[name], problem,
                          lam, u_hat, dt, inner, tally)
    if phi is None:
        phi = phi_table(lam, dt, name)
    if name == "etd1":
        f0 = problem.explicit_rhs_hat(u_hat)
        if tally is not None:
            tally.explicit_evals += 1
        return phi.exp_full * u_hat + dt * (phi.phi1_full * f0)
    if name == "erk4_krogstad":
        return _krogstad_step(problem, phi, u_hat, dt, tally)
    raise KeyError(f"unknown scheme {name!r}")


def _imex_step(tab: _ImexTableau, need_exp: tuple, problem: ProblemSpec,
               lam: np.ndarray, u_hat: np.ndarray, dt: float,
               inner: InnerSolve | None, tally: CostTally | None) -> np.ndarray:
    s = tab.stages
    f_exp: list = [None] * s
    lam_u: list = [None] * s
    for i in range(s):
        acc = u_hat.copy()
        for j in range(i):
            ae = tab.a_exp[i][j]
            if ae != 0.0:
                acc += (dt * ae) * f_exp[j]
            ai = tab.a_imp[i][j]
            if ai != 0.0:
                acc += (dt * ai) * lam_u[j]
        gii = tab.a_imp[i][i]
        if gii != 0.0:
            u_i = implicit_solve_hat(lam, acc, dt * gii, inner=inner, tally=tally)
        else:
            u_i = acc
        lam_u[i] = lam * u_i
        if need_exp[i]:
            f_exp[i] = problem.explicit_rhs_hat(u_i)
            if tally is not None:
                tally.explicit_evals += 1
    out = u_hat.copy()
    for i in range(s):
        be = tab.b_exp[i]
        if be != 0.0:
            out += (dt * be) * f_exp[i]
        bi = tab.b_imp[i]
        if bi != 0.0:
            out += (dt * bi) * lam_u[i]
    return out


def _krogstad_step(problem: ProblemSpec, phi: PhiTable, u_hat: np.ndarray,
                   dt: float, tally: CostTally | None) -> np.ndarray:
    rhs = problem.explicit_rhs_hat
    e_h, e_f = phi.exp_half, phi.exp_full
    p1h, p2h = phi.phi1_half, phi.phi2_half
    p1, p2, p3 = phi.phi1_full, phi.phi2_full, phi.phi3_full

    f1 = rhs(u_hat)
    u2 = e_h * u_hat + (0.5 * dt) * (p1h * f1)
    f2 = rhs(u2)
    u3 = e_h * u_hat + dt * ((0.5 * p1h - p2h) * f1 + p2h * f2)
    f3 = rhs(u3)
    u4 = e_f * u_hat + dt * ((p1 - 2.0 * p2) * f1 + (2.0 * p2) * f3)
    f4 = rhs(u4)
    if tally is not None:
        tally.explicit_evals += 4
    return e_f * u_hat + dt * (
        (p1 - 3.0 * p2 + 4.0 * p3) * f1
        + (2.0 * p2 - 4.0 * p3) * f2
        + (2.0 * p2 - 4.0 * p3) * f3
        + (4.0 * p3 - p2) * f4
    )


def step(stepper: StepperSpec, problem: ProblemSpec, u: SpectralField,
         t: float, dt: float, *, inner: InnerSolve | None = None,
         tally: CostTally | None = None,
         phi: PhiTable | None = None) -> SpectralField:
    out = step_hat(stepper, problem, u.hat, t, dt, inner=inner, tally=tally,
                   phi=phi)
    return SpectralField.from_hat(out, problem.length)


@dataclass
class IntegrateResult:
    value: SpectralField
    n_steps: int
    cost_units: float
    tally: CostTally
    trajectory: list | None = None


def integrate(stepper: StepperSpec, problem: ProblemSpec, u0: SpectralField,
              t0: float, t1: float, n_steps: int, *,
              inner: InnerSolve | None = None,
              record_trajectory: bool = False) -> IntegrateResult:
    """Advance ``u0`` from t0 to t1 in ``n_steps`` equal steps.

    Deterministic; returns the accumulated cost in stepper ``cost_units``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dt = (t1 - t0) / n_steps
    lam = problem.implicit_symbol(u0.n)
    phi = None
    if stepper.scheme in ("etd1", "erk4_krogstad"):
        phi = phi_table(lam, dt, stepper.scheme)
    tally = CostTally()
    u_hat = u0.hat.copy()
    traj = [SpectralField.from_hat(u_hat, problem.length)] if record_trajectory else None
    t = t0
    for k in range(n_steps):
        u_hat = step_hat(stepper, problem, u_hat, t, dt, inner=inner,
                         tally=tally, phi=phi)
        t = t0 + (k + 1) * dt
        if traj is not None:
            traj.append(SpectralField.from_hat(u_hat, problem.length))
    return IntegrateResult(
        value=SpectralField.from_hat(u_hat, problem.length),
        n_steps=n_steps,
        cost_units=float(n_steps * stepper.cost_units),
        tally=tally,
        trajectory=traj,
    )
