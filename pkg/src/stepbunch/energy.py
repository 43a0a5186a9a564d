"""Local density, nonlocal energies, chemical potential and optimality residuals.

The canonical energy is the kernel form

    E[rho] = -1/2 <rho, K_m * rho> + eps^(1-m) int Phi_{m,n}(rho)

and splits as ``E = -(I_tilde + W) + local`` with ``I_tilde`` the Fourier
quadratic form of the height deviation and ``W = A^2 ||K_m||_1 / 2``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from ._lattice import paired_sum
from .errors import ConfigurationError, DomainError, InfeasibleError
from .kernel import KernelTable
from .profile import GridProfile, SpectralProfile, spectral_derivative, to_spectral
from .special import ModelParams, s_constant

__all__ = [
    "EnergyBreakdown",
    "phi",
    "phi_prime",
    "phi_second",
    "phi_prime_inverse",
    "local_energy",
    "nonlocal_energy_fourier",
    "nonlocal_energy_kernel",
    "null_lagrangian",
    "total_energy",
    "chemical_potential",
    "nonlocal_potential_spectral",
    "nonlocal_apply_fractional",
    "l2_gradient",
    "el_residual",
    "interpolation_bound_check",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    nonlocal_tilde: float
    null_lagrangian: float
    local: float
    total: float

    def as_dict(self):
        return asdict(self)


def _as_array(xi):
    return np.asarray(xi, dtype=float)


def _ret(out, xi):
    return float(out) if np.ndim(xi) == 0 else out


def phi(xi, params: ModelParams):
    """Local energy density ``Phi_{m,n}``; ``Phi(0) = 0``.

    Negative arguments lie outside the admissible set (``Phi = +inf``) and
    raise :class:`InfeasibleError`.
    """
    x = _as_array(xi)
    if not np.all(np.isfinite(x)):
        raise DomainError("Phi requires finite arguments")
    if np.any(x < 0):
        raise InfeasibleError("Phi is +infinity for negative slope")
    m, n, g = params.m, params.n, params.gamma
    pos = x > 0
    xp = np.where(pos, x, 1.0)
    if m == 0.0:
        first = xp * np.log(xp)
    else:
        first = xp ** (m + 1.0) / (m * (m + 1.0))
    out = np.where(pos, first + g / (n * (n + 1.0)) * xp ** (n + 1.0), 0.0)
    return _ret(out, xi)


def _check_positive(x, what):
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{what} requires finite arguments")
    if np.any(x <= 0):
        raise DomainError(f"{what} is defined only for positive slope")


def phi_prime(xi, params: ModelParams):
    """``Phi'_{m,n}(xi)`` for ``xi > 0``."""
    x = _as_array(xi)
    _check_positive(x, "Phi'")
    m, n, g = params.m, params.n, params.gamma
    first = np.log(x) + 1.0 if m == 0.0 else x ** m / m
    return _ret(first + g / n * x ** n, xi)


def phi_second(xi, params: ModelParams):
    """``Phi''_{m,n}(xi) = xi^(m-1) + gamma xi^(n-1)`` for ``xi > 0``."""
    x = _as_array(xi)
    _check_positive(x, "Phi''")
    return _ret(x ** (params.m - 1.0) + params.gamma * x ** (params.n - 1.0), xi)


def _phi_prime_log(u, params):
    """``Phi'(e^u)`` and its ``u``-derivative ``e^u Phi''(e^u)``."""
    m, n, g = params.m, params.n, params.gamma
    en = np.exp(n * u)
    if m == 0.0:
        return u + 1.0 + g / n * en, 1.0 + g * en
    em = np.exp(m * u)
    return em / m + g / n * en, em + g * en


def phi_prime_inverse(y, params: ModelParams):
    """Solve ``Phi'(rho) = y`` for ``rho >= 0``.

    ``Phi'`` is increasing; where ``y`` lies below its infimum (``y <= 0``
    for ``m > 0``) or the root is below the smallest subnormal, 0 is
    returned.  Safeguarded Newton iteration in ``u = log rho``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo = np.full(y.shape, -745.0)
    f_lo, _ = _phi_prime_log(lo, params)
    zero = f_lo >= y
    hi = np.ones(y.shape)
    while True:
        f_hi, _ = _phi_prime_log(hi, params)
        short = f_hi < y
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    # coarse bisection first: Newton in u is slow far from the root
    for _ in range(14):
        mid = 0.5 * (lo + hi)
        f, _ = _phi_prime_log(mid, params)
        lo = np.where(f < y, mid, lo)
        hi = np.where(f < y, hi, mid)
    u = np.where(zero, lo, 0.5 * (lo + hi))
    for _ in range(100):
        f, df = _phi_prime_log(u, params)
        r = f - y
        lo = np.where(r < 0, u, lo)
        hi = np.where(r > 0, u, hi)
        step = r / df
        un = u - step
        bad = ~((un > lo) & (un < hi))
        un = np.where(bad, 0.5 * (lo + hi), un)
        done = np.abs(un - u) <= 1e-15 * np.maximum(1.0, np.abs(u))
        u = un
        if np.all(done | zero):
            break
    return np.where(zero, 0.0, np.exp(u))


def local_energy(p: GridProfile, params: ModelParams) -> float:
    """``eps^(1-m) * mean(Phi(rho))`` (trapezoid rule on the periodic grid)."""
    p.require_feasible()
    vals = phi(p.rho, params)
    return params.local_prefactor * math.fsum(vals) / p.N


def _same_grid(p, K):
    if K.N != p.N:
        raise ConfigurationError(f"grid size mismatch: profile N = {p.N}, kernel N = {K.N}")


def _check_kernel(K, params):
    if K.m != params.m:
        raise ConfigurationError(f"kernel built for m = {K.m}, parameters have m = {params.m}")


def nonlocal_energy_fourier(s: SpectralProfile, params) -> float:
    """``I_tilde = S_m sum_k |k|^(m+1) |h_k|^2``.

    ``params`` may be a :class:`ModelParams` or the exponent ``m`` itself.
    """
    m = params.m if hasattr(params, "m") else float(params)
    k = np.abs(s.wavenumbers).astype(float)
    w = k ** (m + 1.0)
    return s_constant(m) * float(np.sum(w * np.abs(s.coeffs) ** 2))


def _quadratic(rho, K: KernelTable, skip_mean=False):
    """``1/2 sum_k M_k |rho_hat_k|^2`` from a real FFT."""
    N = rho.size
    F = np.fft.rfft(rho) / N
    M = K.fft_multipliers[: N // 2 + 1]
    a2 = np.abs(F) ** 2
    w = np.full(a2.size, 2.0)
    w[0] = 0.0 if skip_mean else 1.0
    w[-1] = 1.0  # single Nyquist bin; its multiplier is already halved
    return 0.5 * float(np.sum(w * M * a2))


def nonlocal_energy_kernel(p: GridProfile, K: KernelTable) -> float:
    """``1/2 <rho, K * rho>`` in multiplier space."""
    _same_grid(p, K)
    return _quadratic(p.rho, K)


def null_lagrangian(p: GridProfile, K: KernelTable) -> float:
    """``W = (A/2) ||rho * K||_1`` with the real-space cell-averaged kernel."""
    _same_grid(p, K)
    p.require_feasible()
    conv = K.convolve_real_space(p.rho)
    return 0.5 * p.A * math.fsum(np.abs(conv)) / p.N


def total_energy(p: GridProfile, K: KernelTable, params: ModelParams) -> EnergyBreakdown:
    _same_grid(p, K)
    _check_kernel(K, params)
    tilde = _quadratic(p.rho, K, skip_mean=True)
    w = null_lagrangian(p, K)
    loc = local_energy(p, params)
    return EnergyBreakdown(tilde, w, loc, -(tilde + w) + loc)


def l2_gradient(rho, K: KernelTable, params: ModelParams, rho_floor=0.0):
    """``-K*rho + eps^(1-m) Phi'(max(rho, rho_floor))``."""
    r = np.maximum(rho, rho_floor) if rho_floor > 0 else rho
    return -K.convolve(rho) + params.local_prefactor * phi_prime(r, params)


def chemical_potential(p: GridProfile, K: KernelTable, params: ModelParams) -> np.ndarray:
    """``mu = (K*rho)' - eps^(1-m) (Phi'(rho))'`` with spectral derivatives."""
    _same_grid(p, K)
    _check_kernel(K, params)
    if np.any(p.rho <= 0):
        raise DomainError("chemical potential requires rho > 0 everywhere")
    return -spectral_derivative(l2_gradient(p.rho, K, params))


def nonlocal_potential_spectral(p: GridProfile, m: float) -> np.ndarray:
    """Nonlocal part of ``mu`` from the coefficients ``-2 S_m |k|^(m+1) h_k``."""
    s = to_spectral(p)
    k = s.wavenumbers
    c = -2.0 * s_constant(m) * np.abs(k).astype(float) ** (m + 1.0) * s.coeffs
    return _synthesize(c, p.N)


def _synthesize(c, N):
    """Grid values ``sum_k c_k exp(2 pi i k x_j)`` for ``k = -N/2..N/2``."""
    half = N // 2
    k = np.arange(-half, half + 1)
    F = np.zeros(N, dtype=complex)
    np.add.at(F, k % N, c * np.where(k % 2 == 0, 1.0, -1.0))
    return np.fft.ifft(F).real * N


def _sin2_minus_theta2(theta):
    """``sin(t)^2 - t^2`` without cancellation for small ``t``."""
    t2 = theta * theta
    small = np.abs(theta) < 0.1
    series = t2 * t2 * (-1.0 / 3.0 + t2 * (2.0 / 45.0 + t2 * (-1.0 / 315.0 + t2 * 2.0 / 14175.0)))
    return np.where(small, series, np.sin(theta) ** 2 - t2)


def nonlocal_apply_fractional(p: GridProfile, m: float, nodes: int | None = None) -> np.ndarray:
    """``(m+1) P.V. int (h(x) - h(y)) / |x-y|^(m+2) dy`` over the whole line.

    The near-field integral subtracts the second-order Taylor term of the
    height at ``x``; the subtracted piece is integrated in closed form and the
    periodic images beyond one half period are summed into a smooth weight.
    The result equals the negative of the nonlocal part of the chemical
    potential.
    """
    if not -1.0 < m < 1.0:
        raise DomainError(f"exponent must satisfy -1 < m < 1, got {m}")
    N = p.N
    s = to_spectral(p)
    k = s.wavenumbers.astype(float)
    h = s.coeffs
    q = nodes or max(64, N)
    half = 0.5
    # Gauss-Jacobi for int_0^{1/2} u^{-m} f(u) du
    t, w = roots_jacobi(q, 0.0, -m)
    uj = half * (t + 1.0) / 2.0
    wj = w * (half / 2.0) ** (1.0 - m)
    # Gauss-Legendre for the smooth image-tail integral
    tl, wl = roots_legendre(q)
    ul = half * (tl + 1.0) / 2.0
    wlw = wl * half / 2.0
    R = paired_sum([(1.0 / (m + 1.0), 1.0 + ul, 2), (1.0 / (m + 1.0), 1.0 - ul, 2)], m)

    theta = np.pi * np.outer(uj, k)
    near = (4.0 * _sin2_minus_theta2(theta) / uj[:, None] ** 2) * h[None, :]
    c_near = wj @ near
    second = -4.0 * np.pi ** 2 * k ** 2 * h  # coefficients of h''
    c_sub = -second * half ** (1.0 - m) / (1.0 - m)
    thetal = np.pi * np.outer(ul, k)
    far = 4.0 * np.sin(thetal) ** 2 * h[None, :]
    c_far = (wlw * R) @ far
    return (m + 1.0) * _synthesize(c_near + c_sub + c_far, N)


def el_residual(p: GridProfile, K: KernelTable, params: ModelParams, support_mask) -> float:
    """Sup norm of ``-K*rho + eps^(1-m) Phi'(rho) + lambda`` on the support.

    ``lambda`` is chosen as minus the mean of the first two terms over the
    support.
    """
    _same_grid(p, K)
    _check_kernel(K, params)
    mask = np.asarray(support_mask, dtype=bool)
    if mask.shape != (p.N,):
        raise ConfigurationError("support mask must have one entry per grid point")
    if not mask.any():
        raise DomainError("empty support")
    if np.any(p.rho[mask] <= 0):
        raise DomainError("rho must be positive on the support")
    g = -K.convolve(p.rho)[mask] + params.local_prefactor * phi_prime(p.rho[mask], params)
    r = g - g.mean()
    return float(np.max(np.abs(r)))


def interpolation_bound_check(p: GridProfile, K: KernelTable, params: ModelParams, N_cut: int):
    """Return ``(I_tilde_0, 2/N_cut ||rho||_2^2 + 3 A^2 + A^2 log N_cut)``."""
    if params.m != 0.0:
        raise DomainError("the interpolation bound is stated for m = 0")
    if not (isinstance(N_cut, (int, np.integer)) and N_cut >= 1):
        raise DomainError(f"N_cut must be a positive integer, got {N_cut!r}")
    _same_grid(p, K)
    lhs = _quadratic(p.rho, K, skip_mean=True)
    A = p.A
    rhs = 2.0 / N_cut * float(np.mean(p.rho ** 2)) + 3.0 * A * A + A * A * math.log(N_cut)
    return lhs, rhs
