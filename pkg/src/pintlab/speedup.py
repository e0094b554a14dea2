"""Theoretical speedup and efficiency models as pure functions.

Every speedup number this repo reports flows through one of these
functions, and every report prints the formula and its inputs next to the
number (see ``provenance``): hiding the model behind a bare figure is one
of the pitfalls the audit module flags.

Models
------
* Parareal bound:      S = N_P / (N_P*alpha + K*(1 + alpha))
* Overhead model:      S = N_P / (N_P*alpha/K_S + (K_P/K_S)*(1 + alpha + beta))
* Iteration-count:     S = serial iterations / parallel iterations
* Measured:            S = serial seconds / parallel seconds
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

__all__ = [
    "PararealSpeedupInputs",
    "OverheadSpeedupInputs",
    "parareal_theoretical_speedup",
    "overhead_speedup",
    "iteration_count_speedup",
    "measured_speedup",
    "parallel_efficiency",
    "solve_beta",
    "provenance",
]


@dataclass(frozen=True)
class PararealSpeedupInputs:
    n_procs: int
    alpha: float     # coarse/fine cost ratio; alpha = 0 allowed as a limit
    k_iters: int

    def __post_init__(self):
        if self.n_procs < 1:
            raise ValueError("n_procs must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.k_iters < 1:
            raise ValueError("k_iters must be >= 1")


@dataclass(frozen=True)
class OverheadSpeedupInputs:
    n_procs: int
    alpha: float
    beta: float      # overhead, in units of one fine-level sweep
    k_serial: float  # serial baseline iterations per step
    k_parallel: float

    def __post_init__(self):
        if self.n_procs < 1 or self.alpha <= 0 or self.k_serial <= 0 \
                or self.k_parallel <= 0:
            raise ValueError("all overhead-model inputs must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


def parareal_theoretical_speedup(inputs: PararealSpeedupInputs) -> float:
    n, a, k = inputs.n_procs, inputs.alpha, inputs.k_iters
    return n / (n * a + k * (1.0 + a))


def overhead_speedup(inputs: OverheadSpeedupInputs) -> float:
    n, a, b = inputs.n_procs, inputs.alpha, inputs.beta
    ks, kp = inputs.k_serial, inputs.k_parallel
    return n / (n * a / ks + (kp / ks) * (1.0 + a + b))


def iteration_count_speedup(serial_iters: float, parallel_iters: float) -> float:
    if parallel_iters <= 0:
        raise ZeroDivisionError("parallel iteration count must be positive")
    return serial_iters / parallel_iters


def measured_speedup(t_serial: float, t_parallel: float) -> float:
    if t_parallel <= 0:
        raise ZeroDivisionError("parallel wall-clock time must be positive")
    return t_serial / t_parallel


def parallel_efficiency(speedup: float, n_procs: int) -> float:
    if n_procs < 1:
        raise ValueError("n_procs must be >= 1")
    return speedup / n_procs


def solve_beta(measured: float, n_procs: int, alpha: float, k_serial: float,
               k_parallel: float, tol: float = 1e-10,
               beta_max: float = 1e3) -> float:
    """Invert the overhead model for beta by bisection.

    The model is strictly decreasing in beta, so a solution in
    [0, beta_max] exists iff measured lies between the beta=beta_max and
    beta=0 speedups.
    """
    def s_of(beta: float) -> float:
        return overhead_speedup(OverheadSpeedupInputs(n_procs, alpha, beta,
                                                      k_serial, k_parallel))

    lo, hi = 0.0, beta_max
    s_lo, s_hi = s_of(lo), s_of(hi)
    if measured > s_lo + 1e-12:
        raise ValueError(f"measured speedup {measured} exceeds the beta=0 "
                         f"model value {s_lo}")
    if measured < s_hi:
        raise ValueError(f"no beta in [0, {beta_max}] explains a speedup of "
                         f"{measured}")
    if abs(measured - s_lo) <= 1e-12:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if s_of(mid) >= measured:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def provenance(model: str, inputs, value: float) -> dict:
    """Bundle a speedup number with its model id and inputs for reports."""
    formulas = {
        "parareal_theory": "S = N_P / (N_P*alpha + K*(1+alpha))",
        "overhead_model": "S = N_P / (N_P*alpha/K_S + (K_P/K_S)*(1+alpha+beta))",
        "iteration_count": "S = serial iterations / parallel iterations",
        "measured": "S = serial seconds / parallel seconds",
        "critical_path": "S = serial cost units / pipelined critical-path cost units",
    }
    if model not in formulas:
        raise KeyError(f"unknown speedup model {model!r}")
    if hasattr(inputs, "__dataclass_fields__"):
        inputs = asdict(inputs)
    return {"value": value, "model": model, "formula": formulas[model],
            "inputs": inputs}
