"""Grid and spectral representations of a periodic step density.

The period ``[-1/2, 1/2)`` carries ``N`` grid points ``x_j = -1/2 + j/N``.
A profile stores the step density ``rho = h_x``; the height deviation
``h - A x`` is recovered by spectral antidifferentiation.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, InfeasibleError

__all__ = [
    "GridProfile",
    "SpectralProfile",
    "grid_points",
    "height_from_density",
    "to_spectral",
    "from_spectral",
    "spectral_derivative",
    "rearrange_decreasing",
    "center_profile",
    "shift_profile",
    "read_profile_csv",
    "write_profile_csv",
    "format_float",
]

MEAN_TOL = 1e-12


def _is_pow2(N):
    return isinstance(N, (int, np.integer)) and N > 0 and (N & (N - 1)) == 0


def grid_points(N):
    return -0.5 + np.arange(N) / N


@dataclass(frozen=True, eq=False)
class GridProfile:
    """Step density ``rho`` on the uniform periodic grid, with mean slope ``A``.

    The mean constraint is checked on construction; nonnegativity is
    reported by :attr:`feasible` and enforced where it matters.
    """

    N: int
    A: float
    rho: np.ndarray

    def __post_init__(self):
        if not _is_pow2(self.N):
            raise ConfigurationError(f"grid size must be a power of two, got {self.N!r}")
        rho = np.array(self.rho, dtype=float)
        if rho.shape != (self.N,):
            raise ConfigurationError(f"rho has shape {rho.shape}, expected ({self.N},)")
        if not np.all(np.isfinite(rho)):
            raise DomainError("rho must be finite")
        if not (math.isfinite(self.A) and self.A > 0):
            raise DomainError(f"mean slope must be positive, got {self.A}")
        if abs(rho.mean() - self.A) > MEAN_TOL * max(1.0, self.A):
            raise DomainError(f"mean of rho is {rho.mean()!r}, expected A = {self.A!r}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "A", float(self.A))

    @classmethod
    def uniform(cls, N, A):
        return cls(N, A, np.full(N, float(A)))

    @property
    def x(self):
        return grid_points(self.N)

    @property
    def feasible(self):
        return bool(np.all(self.rho >= 0.0))

    def require_feasible(self):
        if not self.feasible:
            j = int(np.argmin(self.rho))
            raise InfeasibleError(f"negative density {self.rho[j]!r} at x = {self.x[j]!r}")

    def with_rho(self, rho):
        return GridProfile(self.N, self.A, rho)


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Fourier coefficients ``h_k``, ``k = -N/2..N/2``, of the height deviation.

    ``coeffs[k + N//2]`` holds ``h_k``.  ``h_0 = 0`` and
    ``h_{-k} = conj(h_k)``.  The Nyquist mode of the grid is split equally
    between ``k = -N/2`` and ``k = N/2``.
    """

    N: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.N + 1,):
            raise ConfigurationError(f"expected {self.N + 1} coefficients, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def wavenumbers(self):
        return np.arange(-(self.N // 2), self.N // 2 + 1)

    def coefficient(self, k):
        return self.coeffs[k + self.N // 2]


def _density_coefficients(rho):
    """``rho_hat_k`` (FFT order) of the trigonometric interpolant on ``x_j``."""
    N = rho.size
    k = np.fft.fftfreq(N, 1.0 / N)
    phase = np.where(k.astype(int) % 2 == 0, 1.0, -1.0)
    return phase * np.fft.fft(rho) / N


def to_spectral(p: GridProfile) -> SpectralProfile:
    """Height coefficients ``h_k = rho_hat_k / (2 pi i k)``."""
    N = p.N
    rh = _density_coefficients(p.rho)
    half = N // 2
    c = np.zeros(N + 1, dtype=complex)
    for sign in (1, -1):
        pos = np.arange(1, half)
        idx = pos if sign > 0 else N - pos
        c[half + sign * pos] = rh[idx] / (2j * np.pi * sign * pos)
    ny = 0.5 * rh[half].real
    c[half + half] = ny / (2j * np.pi * half)
    c[0] = ny / (-2j * np.pi * half)
    return SpectralProfile(N, c)


def from_spectral(s: SpectralProfile, A: float, N: int | None = None) -> GridProfile:
    """Inverse of :func:`to_spectral` for a given mean slope."""
    if N is not None and N != s.N:
        raise ConfigurationError(f"size mismatch: spectral N = {s.N}, requested {N}")
    N = s.N
    half = N // 2
    rh = np.zeros(N, dtype=complex)
    pos = np.arange(1, half)
    rh[pos] = 2j * np.pi * pos * s.coeffs[half + pos]
    rh[N - pos] = -2j * np.pi * pos * s.coeffs[half - pos]
    rh[half] = 2j * np.pi * half * s.coeffs[2 * half] + (-2j * np.pi * half) * s.coeffs[0]
    k = np.fft.fftfreq(N, 1.0 / N)
    phase = np.where(k.astype(int) % 2 == 0, 1.0, -1.0)
    rho = np.fft.ifft(phase * rh * N).real + A
    # restore the exact mean lost to rounding
    rho += A - rho.mean()
    return GridProfile(N, A, rho)


def height_from_density(p: GridProfile) -> np.ndarray:
    """Grid samples of the zero-mean height deviation ``h - A x``."""
    N = p.N
    F = np.fft.rfft(p.rho - p.A)
    k = np.arange(F.size)
    H = np.zeros_like(F)
    H[1:] = F[1:] / (2j * np.pi * k[1:])
    # the Nyquist sine of the height vanishes on the grid
    H[-1] = 0.0
    return np.fft.irfft(H, n=N)


def spectral_derivative(f):
    """Derivative of a 1-periodic grid function; the Nyquist mode is dropped."""
    f = np.asarray(f, dtype=float)
    N = f.size
    F = np.fft.rfft(f)
    k = np.arange(F.size)
    D = 2j * np.pi * k
    D[-1] = 0.0
    return np.fft.irfft(D * F, n=N)


def _radial_order(N):
    """Grid indices by increasing ``|x_j|``, ties resolved toward ``x >= 0``."""
    j = np.arange(N)
    x2 = 2 * j - N  # 2N x_j, exact integers
    return np.lexsort((x2 < 0, np.abs(x2)))


def rearrange_decreasing(p: GridProfile) -> GridProfile:
    """Symmetric decreasing rearrangement on the grid.

    Values sorted in descending order fill the grid from ``x = 0`` outward.
    ``x = -1/2`` has no mirror partner and receives the smallest value.
    """
    order = _radial_order(p.N)
    vals = np.sort(p.rho)[::-1]
    out = np.empty(p.N)
    out[order] = vals
    return GridProfile(p.N, p.A, out)


def shift_profile(p: GridProfile, shift: int) -> GridProfile:
    return GridProfile(p.N, p.A, np.roll(p.rho, shift))


def center_profile(p: GridProfile) -> GridProfile:
    """Circularly shift ``rho`` so its circular centroid sits at ``x = 0``."""
    N = p.N
    z = np.sum(p.rho * np.exp(2j * np.pi * p.x))
    if abs(z) <= 1e-14 * np.sum(np.abs(p.rho)):
        return p
    c = np.angle(z) / (2.0 * np.pi)
    return shift_profile(p, int(-round(c * N)))


def format_float(v):
    return format(float(v), ".17g")


def write_profile_csv(path, p: GridProfile):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "rho"])
    for x, r in zip(p.x, p.rho):
        w.writerow([format_float(x), format_float(r)])
    atomic_write_text(path, buf.getvalue())


def read_profile_csv(path, A=None) -> GridProfile:
    """Read a ``x,rho`` profile; ``A`` defaults to the mean of ``rho``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "rho"]:
        raise ConfigurationError(f"{path}: expected header 'x,rho'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    N = data.shape[0]
    if not _is_pow2(N):
        raise ConfigurationError(f"{path}: {N} rows, expected a power of two")
    if np.max(np.abs(data[:, 0] - grid_points(N))) > 1e-12:
        raise ConfigurationError(f"{path}: x column is not the uniform grid from -0.5")
    rho = data[:, 1]
    if A is None:
        A = float(rho.mean())
    return GridProfile(N, A, rho)


def atomic_write_text(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
