"""Benchmark PDEs as implicit/explicit splittings.

Three 1-D periodic problems drive every experiment in this repo:

* ``adr`` -- advection-diffusion-reaction
  ``u_t = v u_x + gamma u u_x + nu u_xx + beta_r u (a-u)(b-u)``
  with linear advection and diffusion treated implicitly.
* ``nls`` -- focusing nonlinear Schroedinger
  ``u_t = i u_xx + 2i |u|^2 u`` with the linear part implicit.
* ``ks`` -- Kuramoto-Sivashinsky ``u_t = -u u_x - u_xx - u_xxxx`` whose
  linear symbol ``k^2 - k^4`` is meant for the exponential integrators.

The implicit part of every splitting is diagonal in Fourier space, so the
implicit stage solve ``(I - c*Lambda)^{-1}`` is a per-mode division (or,
optionally, an iterative Richardson solve used to study inner-tolerance
waste).

Reference solutions come from a serial high-order oracle run, certified by
step-halving and cached on disk.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field as dc_field, asdict
from pathlib import Path

import numpy as np

from .spectral import (
    SpectralField,
    derivative_factor,
    fft,
    ifft,
    interpolate,
    max_norm,
)

__all__ = [
    "SingularModeError",
    "AdrParams",
    "NlsParams",
    "KsParams",
    "ProblemSpec",
    "InnerSolve",
    "CostTally",
    "make_problem",
    "named_adr_params",
    "adr_initial_condition",
    "evaluate_explicit",
    "evaluate_rhs",
    "apply_implicit_solve",
    "implicit_solve_hat",
    "reference_solution",
    "solution_error",
    "default_cache_dir",
]

CACHE_ENV_VAR = "PINTLAB_CACHE"


class SingularModeError(ArithmeticError):
    """An implicit stage solve hit a (near-)singular Fourier mode."""


# ---------------------------------------------------------------------------
# parameter bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdrParams:
    v: float = -0.5
    gamma: float = 0.25
    nu: float = 0.01
    beta_r: float = -5.0
    a: float = 1.0
    b: float = 0.0
    d: float = 0.55
    sigma: float = 0.02
    length: float = 2 * np.pi
    t_final: float = 30.0

    def __post_init__(self):
        if self.nu < 0 or self.sigma <= 0 or self.length <= 0:
            raise ValueError("AdrParams requires nu >= 0, sigma > 0, L > 0")


@dataclass(frozen=True)
class NlsParams:
    length: float = 2 * np.pi
    t_final: float = 0.5
    # steepness of the default initial profile 1/(1 - q cos x); q controls
    # how much spectral content sits near the n=32 Nyquist mode.  The
    # defaults put the n=32 truncation error at the few-1e-5 level and keep
    # the explicit nonlinearity stable at coarse-propagator step sizes.
    q: float = 0.76

    def __post_init__(self):
        if self.t_final <= 0:
            raise ValueError("NlsParams requires t_final > 0")
        if not 0 < self.q < 1:
            raise ValueError("NlsParams requires 0 < q < 1")


@dataclass(frozen=True)
class KsParams:
    length: float = 32 * np.pi
    t_final: float = 40.0

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("KsParams requires L > 0")


_ADR_NAMED = {
    "adr-steady": AdrParams(),
    "adr-bump": AdrParams(b=0.5),
    "adr-diffused": AdrParams(b=0.5, nu=0.04),
}


def named_adr_params(name: str) -> AdrParams:
    try:
        return _ADR_NAMED[name]
    except KeyError:
        raise KeyError(f"unknown ADR parameter set {name!r}; "
                       f"choose from {sorted(_ADR_NAMED)}") from None


# ---------------------------------------------------------------------------
# problem spec
# ---------------------------------------------------------------------------


class ProblemSpec:
    """A PDE instance: diagonal implicit symbol, explicit term, IC, domain.

    Immutable after construction; safe to share between threads.
    """

    def __init__(self, kind: str, params):
        if kind not in ("adr", "nls", "ks"):
            raise ValueError(f"unknown problem kind {kind!r}")
        self.kind = kind
        self.params = params
        self._symbols: dict[int, np.ndarray] = {}
        self._dfactors: dict[int, np.ndarray] = {}

    @property
    def length(self) -> float:
        return self.params.length

    @property
    def t_final(self) -> float:
        return self.params.t_final

    def params_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self.params)}

    def __repr__(self):  # pragma: no cover
        return f"ProblemSpec({self.kind}, {self.params})"

    # -- implicit (linear, Fourier-diagonal) part ---------------------------

    def implicit_symbol(self, n: int) -> np.ndarray:
        lam = self._symbols.get(n)
        if lam is not None:
            return lam
        d1 = derivative_factor(n, self.length, 1)
        d2 = derivative_factor(n, self.length, 2)
        if self.kind == "adr":
            lam = self.params.v * d1 + self.params.nu * d2
        elif self.kind == "nls":
            lam = 1j * d2
        else:  # ks
            d4 = derivative_factor(n, self.length, 4)
            lam = -d2 - d4
        self._symbols[n] = lam
        return lam

    def _d1(self, n: int) -> np.ndarray:
        d1 = self._dfactors.get(n)
        if d1 is None:
            d1 = derivative_factor(n, self.length, 1)
            self._dfactors[n] = d1
        return d1

    # -- explicit part -------------------------------------------------------

    def explicit_rhs_hat(self, u_hat: np.ndarray) -> np.ndarray:
        """Explicit term, pseudo-spectrally: derivatives in Fourier space,
        products in physical space.  Accepts batched ``(..., n)`` arrays."""
        n = u_hat.shape[-1]
        if self.kind == "adr":
            p = self.params
            u = ifft(u_hat)
            ux = ifft(self._d1(n) * u_hat)
            r = p.gamma * u * ux + p.beta_r * u * (p.a - u) * (p.b - u)
            return fft(r)
        if self.kind == "nls":
            u = ifft(u_hat)
            return fft(2j * np.abs(u) ** 2 * u)
        u = ifft(u_hat)
        ux = ifft(self._d1(n) * u_hat)
        return fft(-u * ux)

    # -- initial condition ----------------------------------------------------

    def initial_condition(self, n: int) -> SpectralField:
        x = np.arange(n) * (self.length / n)
        if self.kind == "adr":
            p = self.params
            u0 = 1.0 - p.d * (1.0 - np.exp(-((x - np.pi) ** 4) / p.sigma))
        elif self.kind == "nls":
            # breather-like focusing profile; q sets the spectral decay rate
            q = self.params.q
            u0 = (1.0 / np.sqrt(2.0)) * (1.0 / (1.0 - q * np.cos(x)) - 1.0)
        else:
            u0 = np.cos(x / 16.0) * (1.0 + np.sin(x / 16.0))
        return SpectralField.from_phys(u0.astype(np.complex128), self.length)


def make_problem(kind: str, params=None, **overrides) -> ProblemSpec:
    """Build a ProblemSpec from a kind and optional parameter overrides.

    ``kind`` may also be a named ADR set (``adr-steady`` etc.).
    """
    if kind.startswith("adr-"):
        base = named_adr_params(kind)
        if overrides:
            base = AdrParams(**{**asdict(base), **overrides})
        return ProblemSpec("adr", base)
    if params is None:
        cls = {"adr": AdrParams, "nls": NlsParams, "ks": KsParams}[kind]
        params = cls(**overrides)
    elif overrides:
        params = type(params)(**{**asdict(params), **overrides})
    return ProblemSpec(kind, params)


def adr_initial_condition(n: int, params: AdrParams | None = None) -> SpectralField:
    return ProblemSpec("adr", params or AdrParams()).initial_condition(n)


def evaluate_explicit(problem: ProblemSpec, u: SpectralField) -> SpectralField:
    return SpectralField.from_hat(problem.explicit_rhs_hat(u.hat), problem.length)


def evaluate_rhs(problem: ProblemSpec, u: SpectralField) -> SpectralField:
    """Full right-hand side: implicit symbol times u plus the explicit term."""
    lam = problem.implicit_symbol(u.n)
    return SpectralField.from_hat(
        lam * u.hat + problem.explicit_rhs_hat(u.hat), problem.length
    )


# ---------------------------------------------------------------------------
# implicit stage solve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InnerSolve:
    """Optional iterative inner solver for the (diagonal) implicit stages.

    Replaces the exact per-mode division by damped Richardson iteration;
    exists so the inner-tolerance pitfall can be demonstrated and audited.
    """

    tol: float = 1e-12
    max_iters: int = 200_000

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("inner tolerance must be positive")


@dataclass
class CostTally:
    explicit_evals: int = 0
    implicit_solves: int = 0
    inner_iters: int = 0

    def add(self, other: "CostTally") -> None:
        self.explicit_evals += other.explicit_evals
        self.implicit_solves += other.implicit_solves
        self.inner_iters += other.inner_iters


def implicit_solve_hat(lam: np.ndarray, b_hat: np.ndarray, c: float,
                       inner: InnerSolve | None = None,
                       tally: CostTally | None = None) -> np.ndarray:
    """Solve ``(1 - c*lam) v = b`` per mode.

    Exact division by default; with ``inner`` set, damped Richardson
    iteration to the requested tolerance (iteration count is tallied).
    """
    denom = 1.0 - c * lam
    if np.min(np.abs(denom)) < 1e-14:
        raise SingularModeError(f"implicit solve singular for c={c!r}")
    if tally is not None:
        tally.implicit_solves += 1
    if inner is None or c == 0.0:
        return b_hat / denom
    b_scale = np.max(np.abs(b_hat))
    if b_scale == 0.0:
        return np.zeros_like(b_hat)
    # half-damped preconditioned Richardson: v <- v + (1/2) A*/|A|^2 (b - A v);
    # error contracts by exactly 1/2 per pass for any nonsingular diagonal,
    # so the iteration count scales with log2(1/tol) -- a tolerance knob
    # whose cost is visible, which is all this solver exists to demonstrate
    precond = 0.5 * np.conj(denom) / np.abs(denom) ** 2
    v = np.zeros_like(b_hat)
    iters = 0
    while iters < inner.max_iters:
        r = b_hat - denom * v
        iters += 1
        if np.max(np.abs(r)) <= inner.tol * b_scale:
            break
        v = v + precond * r
    else:
        raise SingularModeError(
            f"inner Richardson solve failed to reach {inner.tol} "
            f"in {inner.max_iters} iterations")
    if tally is not None:
        tally.inner_iters += iters
    return v


def apply_implicit_solve(problem: ProblemSpec, u: SpectralField, c: float,
                         inner: InnerSolve | None = None,
                         tally: CostTally | None = None) -> SpectralField:
    lam = problem.implicit_symbol(u.n)
    return SpectralField.from_hat(
        implicit_solve_hat(lam, u.hat, c, inner=inner, tally=tally),
        problem.length,
    )


# ---------------------------------------------------------------------------
# reference solutions (cached oracle runs)
# ---------------------------------------------------------------------------


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "pintlab"


def problem_hash(problem: ProblemSpec) -> str:
    payload = json.dumps(problem.params_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _default_scheme(problem: ProblemSpec) -> str:
    return "erk4_krogstad" if problem.kind == "ks" else "ark4"


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _run_oracle(problem: ProblemSpec, n: int, n_steps: int, scheme: str) -> SpectralField:
    from .steppers import get_stepper, integrate

    u0 = problem.initial_condition(n)
    return integrate(get_stepper(scheme), problem, u0, 0.0, problem.t_final,
                     n_steps).value


def reference_solution(problem: ProblemSpec, n_ref: int, dt_ref: float | None = None,
                       n_steps: int | None = None, scheme: str | None = None,
                       certify: bool = True,
                       cache_dir: Path | None = None) -> SpectralField:
    """Final-time solution from a serial high-order run, cached on disk.

    Exactly one of ``dt_ref``/``n_steps`` must be given; the step count is
    rounded up to a power of two.  With ``certify=True`` the run is checked
    against a step-halved rerun (relative max-norm below 1e-9) and refused
    otherwise.
    """
    if (dt_ref is None) == (n_steps is None):
        raise ValueError("give exactly one of dt_ref or n_steps")
    if n_steps is None:
        n_steps = max(2, int(np.ceil(problem.t_final / dt_ref)))
    n_steps = 1 << (n_steps - 1).bit_length()  # next power of two
    scheme = scheme or _default_scheme(problem)
    cache_dir = Path(cache_dir) if cache_dir else default_cache_dir()
    pdir = cache_dir / problem_hash(problem)
    dtexp = n_steps.bit_length() - 1
    fname = f"ref_{n_ref}_{dtexp}.bin"
    fpath = pdir / fname

    if fpath.exists():
        raw = fpath.read_bytes()
        hat = np.frombuffer(raw, dtype=np.complex128).copy()
        if hat.size == n_ref:
            return SpectralField.from_hat(hat, problem.length)

    sol = _run_oracle(problem, n_ref, n_steps, scheme)
    cert_delta = None
    if certify:
        finer = _run_oracle(problem, n_ref, 2 * n_steps, scheme)
        cert_delta = float(
            np.max(np.abs(finer.phys - sol.phys)) / max(np.max(np.abs(finer.phys)), 1e-300)
        )
        if cert_delta >= 1e-9:
            raise RuntimeError(
                f"refusing to certify reference for {problem.kind}: halving dt "
                f"changed the solution by {cert_delta:.3e} (>= 1e-9); "
                f"use a finer dt_ref")
        sol = finer

    data = np.ascontiguousarray(sol.hat).tobytes()
    _atomic_write(fpath, data)
    _update_manifest(pdir, problem, fname, n_ref, problem.t_final / n_steps,
                     scheme, data, cert_delta)
    return sol


def _update_manifest(pdir: Path, problem: ProblemSpec, fname: str, n: int,
                     dt: float, scheme: str, data: bytes,
                     cert_delta: float | None) -> None:
    manifest_path = pdir / "manifest.json"
    manifest = {"kind": problem.kind, "params": problem.params_dict(),
                "entries": {}}
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text())
        except (OSError, json.JSONDecodeError):
            pass
    manifest.setdefault("entries", {})[fname] = {
        "n": n,
        "dt": dt,
        "scheme": scheme,
        "sha256": hashlib.sha256(data).hexdigest(),
        "certified_delta": cert_delta,
    }
    _atomic_write(manifest_path, json.dumps(manifest, indent=2,
                                            sort_keys=True).encode())


def solution_error(u: SpectralField, reference: SpectralField) -> float:
    """Relative max-norm difference at final time; grids are reconciled by
    interpolating the coarser field to the finer one."""
    if u.length != reference.length:
        raise ValueError("fields live on different domains")
    if u.n < reference.n:
        u = interpolate(u, reference.n)
    elif reference.n < u.n:
        reference = interpolate(reference, u.n)
    denom = max_norm(reference)
    if denom == 0.0:
        return float(np.max(np.abs(u.phys - reference.phys)))
    return float(np.max(np.abs(u.phys - reference.phys)) / denom)
