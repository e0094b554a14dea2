"""1-D periodic pseudo-spectral kernel.

Discrete Fourier transform (in-repo iterative radix-2), spectral
differentiation and Fourier-space grid transfer (coarsen/refine) on
power-of-two grids.

Conventions
-----------
* Forward transform is the unnormalized sum
  ``u_hat[j] = sum_m u[m] * exp(-2*pi*1j*j*m/n)``; the inverse carries the
  ``1/n`` factor.
* Index ``j`` holds wavenumber ``k_j = 2*pi*w_j/L`` with ``w_j = j`` for
  ``j <= n/2`` and ``w_j = j - n`` otherwise.
* Grid transfer truncates/zero-pads in Fourier space and rescales so that
  physical-space values of band-limited functions are preserved.  The
  coarse-grid Nyquist mode is annihilated by both directions of transfer
  (its aliasing partner is ambiguous); band-limited here always means
  ``|w| < n_coarse/2``.
* No dealiasing anywhere (no 2/3-rule); resolutions in the bundled
  experiments are generous enough that aliasing is not an issue.  This is
  a reproducibility caveat echoed in reports.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "InvalidTransferError",
    "GridPair",
    "SpectralField",
    "fft",
    "ifft",
    "wavenumbers",
    "dft_forward",
    "dft_inverse",
    "spectral_derivative",
    "restrict",
    "interpolate",
    "max_norm",
    "l2_norm",
]


class InvalidTransferError(ValueError):
    """Raised when a grid transfer is requested in the wrong direction."""


class GridPair:
    """A fine/coarse grid-size pair for two-level space hierarchies."""

    __slots__ = ("fine", "coarse")

    def __init__(self, fine: int, coarse: int):
        _check_pow2(fine)
        _check_pow2(coarse)
        if coarse > fine:
            raise InvalidTransferError(
                f"coarse size {coarse} exceeds fine size {fine}")
        if fine % coarse != 0:
            raise InvalidTransferError(f"{coarse} does not divide {fine}")
        self.fine = fine
        self.coarse = coarse

    def __repr__(self):  # pragma: no cover
        return f"GridPair(fine={self.fine}, coarse={self.coarse})"


def _check_pow2(n: int) -> None:
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"grid size must be a power of two >= 2, got {n}")


# ---------------------------------------------------------------------------
# radix-2 FFT
# ---------------------------------------------------------------------------

_PLANS: dict[int, tuple[np.ndarray, list[np.ndarray]]] = {}


def _plan(n: int) -> tuple[np.ndarray, list[np.ndarray]]:
    plan = _PLANS.get(n)
    if plan is not None:
        return plan
    _check_pow2(n)
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.intp)
    for i in range(1, n):
        rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (bits - 1))
    twiddles = []
    half = 1
    while half < n:
        twiddles.append(np.exp((-2j * np.pi / (2 * half)) * np.arange(half)))
        half *= 2
    plan = (rev, twiddles)
    _PLANS[n] = plan
    return plan


def fft(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalized forward DFT along ``axis`` (iterative radix-2 DIT)."""
    a = np.asarray(a, dtype=np.complex128)
    moved = np.moveaxis(a, axis, -1)
    n = moved.shape[-1]
    if n == 1:  # the size-1 transform is the identity
        return a.copy()
    rev, twiddles = _plan(n)
    y = np.ascontiguousarray(moved[..., rev])
    for s, tw in enumerate(twiddles):
        half = 1 << s
        m = 2 * half
        z = y.reshape(y.shape[:-1] + (n // m, m))
        odd = z[..., half:] * tw
        upper = z[..., :half] + odd
        lower = z[..., :half] - odd
        z[..., :half] = upper
        z[..., half:] = lower
    return np.moveaxis(y, -1, axis)


def ifft(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Inverse DFT along ``axis``; carries the 1/n normalization."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[axis]
    return np.conj(fft(np.conj(a), axis=axis)) / n


def wavenumbers(n: int, length: float) -> np.ndarray:
    """Physical wavenumbers ``k_j = 2*pi*w_j/L`` in transform order."""
    j = np.arange(n)
    w = np.where(j <= n // 2, j, j - n).astype(np.float64)
    return 2.0 * np.pi * w / length


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


class SpectralField:
    """Complex-valued periodic grid function with paired representations.

    Holds physical samples at ``x_m = m*L/n`` and/or Fourier coefficients;
    whichever representation is missing is computed lazily and cached.
    Instances are treated as immutable: operations return new fields, and
    the cached arrays must not be written to.
    """

    __slots__ = ("n", "length", "_phys", "_hat")

    def __init__(self, n: int, length: float,
                 phys: np.ndarray | None = None,
                 hat: np.ndarray | None = None):
        _check_pow2(n)
        if length <= 0:
            raise ValueError(f"domain length must be positive, got {length}")
        if phys is None and hat is None:
            raise ValueError("need at least one representation")
        self.n = n
        self.length = float(length)
        self._phys = phys
        self._hat = hat

    @classmethod
    def from_phys(cls, values: np.ndarray, length: float) -> "SpectralField":
        values = np.asarray(values, dtype=np.complex128)
        if values.ndim != 1:
            raise ValueError("expected a 1-D sample array")
        return cls(values.size, length, phys=values.copy())

    @classmethod
    def from_hat(cls, values: np.ndarray, length: float) -> "SpectralField":
        values = np.asarray(values, dtype=np.complex128)
        if values.ndim != 1:
            raise ValueError("expected a 1-D coefficient array")
        return cls(values.size, length, hat=values.copy())

    @property
    def phys(self) -> np.ndarray:
        if self._phys is None:
            self._phys = ifft(self._hat)
        return self._phys

    @property
    def hat(self) -> np.ndarray:
        if self._hat is None:
            self._hat = fft(self._phys)
        return self._hat

    @property
    def rep_valid(self) -> frozenset:
        reps = set()
        if self._phys is not None:
            reps.add("phys")
        if self._hat is not None:
            reps.add("hat")
        return frozenset(reps)

    def grid(self) -> np.ndarray:
        return np.arange(self.n) * (self.length / self.n)

    def wavenumbers(self) -> np.ndarray:
        return wavenumbers(self.n, self.length)

    def __repr__(self) -> str:  # pragma: no cover
        return f"SpectralField(n={self.n}, L={self.length:g}, rep={sorted(self.rep_valid)})"


def dft_forward(field: SpectralField) -> SpectralField:
    """Return the field with its Fourier representation materialized."""
    field.hat
    return field


def dft_inverse(field: SpectralField) -> SpectralField:
    """Return the field with its physical representation materialized."""
    field.phys
    return field


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def derivative_factor(n: int, length: float, order: int) -> np.ndarray:
    """Per-mode multiplier ``(i*k_j)**order``; odd orders zero the Nyquist mode."""
    if order < 1:
        raise ValueError("derivative order must be a positive integer")
    factor = (1j * wavenumbers(n, length)) ** order
    if order % 2 == 1 and n % 2 == 0:
        # antisymmetry fix: the Nyquist mode has no well-defined odd derivative
        factor[n // 2] = 0.0
    return factor


def spectral_derivative(field: SpectralField, order: int) -> SpectralField:
    return SpectralField.from_hat(
        field.hat * derivative_factor(field.n, field.length, order), field.length
    )


def restrict_hat(hat: np.ndarray, n_coarse: int) -> np.ndarray:
    """Fourier truncation of an unnormalized coefficient array."""
    n = hat.shape[-1]
    if n_coarse > n:
        raise InvalidTransferError(f"cannot restrict {n} -> {n_coarse}")
    _check_pow2(n_coarse)
    if n % n_coarse != 0:
        raise InvalidTransferError(f"{n_coarse} does not divide {n}")
    if n_coarse == n:
        return hat.copy()
    kc = n_coarse // 2
    out = np.zeros(hat.shape[:-1] + (n_coarse,), dtype=np.complex128)
    ratio = n_coarse / n
    out[..., :kc] = hat[..., :kc] * ratio
    out[..., kc + 1:] = hat[..., n - kc + 1:] * ratio
    return out


def interpolate_hat(hat: np.ndarray, n_fine: int) -> np.ndarray:
    """Fourier zero-padding of an unnormalized coefficient array."""
    n = hat.shape[-1]
    if n_fine < n:
        raise InvalidTransferError(f"cannot interpolate {n} -> {n_fine}")
    _check_pow2(n_fine)
    if n_fine % n != 0:
        raise InvalidTransferError(f"{n} does not divide {n_fine}")
    if n_fine == n:
        return hat.copy()
    kc = n // 2
    out = np.zeros(hat.shape[:-1] + (n_fine,), dtype=np.complex128)
    ratio = n_fine / n
    out[..., :kc] = hat[..., :kc] * ratio
    out[..., n_fine - kc + 1:] = hat[..., kc + 1:] * ratio
    return out


def restrict(field: SpectralField, n_coarse: int) -> SpectralField:
    return SpectralField.from_hat(restrict_hat(field.hat, n_coarse), field.length)


def interpolate(field: SpectralField, n_fine: int) -> SpectralField:
    return SpectralField.from_hat(interpolate_hat(field.hat, n_fine), field.length)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def max_norm(field: SpectralField) -> float:
    return float(np.max(np.abs(field.phys)))


def l2_norm(field: SpectralField) -> float:
    """Discrete L2 norm: sqrt(L/n * sum |u_m|^2)."""
    u = field.phys
    return float(np.sqrt(field.length / field.n * np.sum(np.abs(u) ** 2)))
