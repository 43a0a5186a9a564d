"""The 1-periodic interaction kernel ``K_m`` in real and Fourier space.

``K_m(z) = (1/m) sum_k (|z+k|^(-m) - |1/2+k|^(-m))`` for ``m != 0`` and
``K_0(z) = -log sin(pi |z|)``.  It is even, nonnegative, vanishes at
``z = 1/2`` and has Fourier coefficients ``S_m |k|^(m-1) / (2 pi^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._lattice import paired_sum
from .errors import ConfigurationError, DomainError, SingularityError
from .special import eta, s_constant

__all__ = [
    "KernelTable",
    "kernel_value",
    "kernel_derivative",
    "kernel_antiderivative",
    "kernel_multiplier",
    "kernel_l1_norm",
    "build_kernel_table",
]


def _check_m(m):
    m = float(m)
    if not (math.isfinite(m) and -1.0 < m < 1.0):
        raise DomainError(f"kernel exponent must satisfy -1 < m < 1, got {m}")
    return m


def _reduce(z):
    """Map to |z| in [0, 1/2], rejecting points outside [-1/2, 1/2]."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("z must be finite")
    if np.any(np.abs(z) > 0.5):
        raise DomainError("z must lie in [-1/2, 1/2]")
    return np.abs(z)


def _scalar_or_array(out, z):
    return float(out) if np.ndim(z) == 0 else out


def kernel_value(m, z):
    """Evaluate ``K_m(z)`` for ``z`` in ``[-1/2, 1/2]``.

    ``z = 0`` is a pole for ``m >= 0``; for ``m < 0`` the kernel is finite
    there and its value is returned.
    """
    m = _check_m(m)
    u = _reduce(z)
    if np.any(u == 0.0) and m >= 0.0:
        raise SingularityError("K_m(0) is infinite for m >= 0")
    if m == 0.0:
        out = -np.log(np.sin(np.pi * u))
    else:
        out = paired_sum([(1.0, u, 0), (1.0, 1.0 - u, 0), (-2.0, 0.5, 0)], m)
    return _scalar_or_array(out, z)


def kernel_derivative(m, z):
    """Evaluate ``K_m'(z) = -sum_k (z+k)/|z+k|^(m+2)`` (principal value)."""
    m = _check_m(m)
    zz = np.asarray(z, dtype=float)
    u = _reduce(zz)
    if np.any(u == 0.0):
        raise SingularityError("K_m' is singular at z = 0")
    d = paired_sum([(1.0, u, 1), (-1.0, 1.0 - u, 1)], m)
    return _scalar_or_array(np.sign(zz) * d, z)


def kernel_antiderivative(m, z):
    """Odd antiderivative ``F(z) = int_0^z K_m`` for ``z`` in ``[-1/2, 1/2]``."""
    m = _check_m(m)
    zz = np.asarray(z, dtype=float)
    u = _reduce(zz)
    terms = [
        (1.0, u, -1),
        (-1.0, 1.0 - u, -1),
        (-1.0, 0.0, -1),
        (1.0, 1.0, -1),
        (-2.0 * u, 0.5, 0),
    ]
    return _scalar_or_array(np.sign(zz) * paired_sum(terms, m), z)


def kernel_multiplier(m, k):
    """Fourier coefficient ``int K_m(z) exp(-2 pi i k z) dz`` for integer ``k``."""
    m = _check_m(m)
    k = np.abs(np.asarray(k, dtype=float))
    sm = s_constant(m)
    with np.errstate(divide="ignore"):
        out = np.where(k == 0, sm * eta(1.0 - m) / math.pi ** 2, sm * k ** (m - 1.0) / (2.0 * math.pi ** 2))
    return _scalar_or_array(out, k)


def kernel_l1_norm(m):
    """``||K_m||_1 = S_m eta(1-m) / pi^2``."""
    m = _check_m(m)
    return s_constant(m) * eta(1.0 - m) / math.pi ** 2


def _is_pow2(N):
    return isinstance(N, (int, np.integer)) and N > 0 and (N & (N - 1)) == 0


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Cell averages and Fourier multipliers of ``K_m`` on an ``N``-point grid.

    Attributes
    ----------
    m : float
    N : int
    real_samples : ndarray, shape (N,)
        Average of ``K_m`` over the cell of width ``1/N`` centred at
        ``z_j = -1/2 + j/N``.
    multipliers : ndarray, shape (N//2 + 1,)
        ``K_hat(k)`` for ``k = 0..N/2``.
    l1_norm : float
        ``K_hat(0)``.
    """

    m: float
    N: int
    real_samples: np.ndarray
    multipliers: np.ndarray
    l1_norm: float

    def __post_init__(self):
        self.real_samples.setflags(write=False)
        self.multipliers.setflags(write=False)

    @property
    def fft_multipliers(self):
        """Length-``N`` multipliers in FFT order; the Nyquist entry is halved.

        The Nyquist mode of a real grid function is shared equally between
        ``k = +N/2`` and ``k = -N/2`` of its trigonometric interpolant.
        """
        N = self.N
        k = np.abs(np.fft.fftfreq(N, 1.0 / N)).astype(int)
        out = self.multipliers[k].copy()
        out[N // 2] *= 0.5
        return out

    @property
    def offset_samples(self):
        """Cell averages indexed by offset ``l``, i.e. centred at ``z = l/N``."""
        return np.roll(self.real_samples, self.N // 2)

    def convolve(self, rho):
        """``K * rho`` on the grid through the multipliers."""
        rho = np.asarray(rho, dtype=float)
        return np.fft.irfft(self.fft_multipliers[: self.N // 2 + 1] * np.fft.rfft(rho), n=self.N)

    def convolve_real_space(self, rho):
        """``K * rho`` with the cell-averaged samples (exact for cellwise-constant ``rho``)."""
        rho = np.asarray(rho, dtype=float)
        kd = self.offset_samples
        return np.fft.irfft(np.fft.rfft(kd) * np.fft.rfft(rho), n=self.N) / self.N


def build_kernel_table(m, N):
    """Tabulate ``K_m`` on an ``N``-point periodic grid.

    Cell averages come from differences of the analytic antiderivative, so
    the integrable singularity at ``z = 0`` needs no special quadrature.
    """
    m = _check_m(m)
    if not _is_pow2(N):
        raise ConfigurationError(f"grid size must be a power of two, got {N!r}")
    if N < 16:
        raise ConfigurationError(f"grid size must be at least 16, got {N}")
    N = int(N)
    h = 1.0 / N
    z = -0.5 + np.arange(N) * h
    lo = np.clip(z - 0.5 * h, -0.5, 0.5)
    hi = np.clip(z + 0.5 * h, -0.5, 0.5)
    avg = (kernel_antiderivative(m, hi) - kernel_antiderivative(m, lo)) / h
    # the cell at z = -1/2 straddles the period boundary
    avg[0] = 2.0 * (kernel_antiderivative(m, 0.5) - kernel_antiderivative(m, 0.5 - 0.5 * h)) / h
    mult = kernel_multiplier(m, np.arange(N // 2 + 1))
    return KernelTable(m=m, N=N, real_samples=avg, multipliers=np.asarray(mult, dtype=float),
                       l1_norm=kernel_l1_norm(m))
