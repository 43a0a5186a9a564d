"""Constrained energy minimization and continuum gradient flow.

Admissible densities form the polytope ``{rho >= 0, mean(rho) = A}``.  The
minimizer exploits the difference-of-convex structure of the energy: the
nonlocal part ``-1/2 <rho, K rho>`` is concave, the local part convex.
Linearizing the concave part at the current iterate gives a convex
majorant whose minimizer over the polytope is available in closed form,

    T(rho) = (Phi')^{-1}((K*rho - lambda) / eps^(1-m)),

with the scalar ``lambda`` fixed by the mean constraint.  ``T(rho) - rho``
is a feasible descent direction; steps along it are accepted by Armijo
backtracking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .energy import (
    EnergyBreakdown,
    _quadratic,
    el_residual,
    l2_gradient,
    phi,
    phi_prime_inverse,
    phi_second,
    total_energy,
)
from .errors import (
    AnsatzError,
    ConfigurationError,
    DegenerateSlopeError,
    DomainError,
    NumericalFailure,
)
from .kernel import KernelTable
from .profile import (
    GridProfile,
    center_profile,
    grid_points,
    rearrange_decreasing,
)
from .special import ModelParams, s_constant

__all__ = [
    "MinimizeOptions",
    "MinimizeResult",
    "project_feasible",
    "ansatz_profile",
    "perturbed_uniform",
    "random_feasible",
    "minimize_energy",
    "detect_support",
    "projected_gradient_norm",
    "linear_growth_rate",
    "evolve_continuum",
]


ENERGY_ROUNDING = 1e-15


@dataclass(frozen=True)
class MinimizeOptions:
    max_iters: int = 2000
    grad_tol: float = 1e-9
    step_init: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    rearrange_every: int = 0
    rho_floor: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ConfigurationError("grad_tol must be positive")
        if not 0 < self.step_init <= 1:
            raise ConfigurationError("step_init must lie in (0, 1]")
        if not 0 < self.armijo_c < 1:
            raise ConfigurationError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigurationError("backtrack_factor must lie in (0, 1)")
        if self.max_iters < 0 or self.rearrange_every < 0:
            raise ConfigurationError("iteration counts must be nonnegative")
        if not self.rho_floor >= 0:
            raise ConfigurationError("rho_floor must be nonnegative")


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    profile: GridProfile
    energy: EnergyBreakdown
    iterations: int
    converged: bool
    el_residual: float
    R0: float
    trace: tuple = field(default=(), repr=False)
    grad_norm: float = math.nan


def project_feasible(v, A) -> GridProfile:
    """Euclidean projection of ``v`` onto ``{rho >= 0, mean(rho) = A}``.

    ``rho = max(v - lam, 0)`` where ``lam`` is located by a scan over the
    sorted breakpoints.  Feasible input is returned unchanged.
    """
    v = np.asarray(v, dtype=float)
    if not (math.isfinite(A) and A > 0):
        raise DomainError(f"mean slope must be positive, got {A}")
    if not np.all(np.isfinite(v)):
        raise DomainError("cannot project non-finite values")
    N = v.size
    if np.all(v >= 0) and abs(v.mean() - A) <= 1e-14 * max(1.0, A):
        return GridProfile(N, A, v)
    u = np.sort(v)[::-1]
    target = N * A
    css = np.cumsum(u)
    k = np.arange(1, N + 1)
    lam_k = (css - target) / k
    # largest k with u_k > lam_k
    valid = u > lam_k
    kk = int(np.nonzero(valid)[0][-1])
    lam = lam_k[kk]
    rho = np.maximum(v - lam, 0.0)
    # one rounding-level correction on the positive set keeps the mean exact
    pos = rho > 0
    rho[pos] += (target - math.fsum(rho)) / pos.sum()
    return GridProfile(N, A, np.maximum(rho, 0.0))


def ansatz_profile(params: ModelParams, N: int) -> GridProfile:
    """Plateau ``rho_0 = eps^(-1/n)`` on ``|x| <= A/(2 rho_0)``, zero elsewhere.

    Cells cut by the plateau edge receive the covered fraction of
    ``rho_0`` so that the mean is exactly ``A``.
    """
    A = params.A
    rho0 = params.epsilon ** (-1.0 / params.n)
    if rho0 < A:
        raise AnsatzError(f"plateau height eps^(-1/n) = {rho0:.6g} is below the mean slope {A}")
    half = 0.5 * A / rho0
    x = grid_points(N)
    hcell = 1.0 / N
    lo = np.maximum(x - 0.5 * hcell, -half)
    hi = np.minimum(x + 0.5 * hcell, half)
    frac = np.clip(hi - lo, 0.0, None) * N
    rho = rho0 * frac
    rho *= A / rho.mean()
    return GridProfile(N, A, rho)


def perturbed_uniform(N, A, amplitude=0.01, k=1):
    """``A (1 + amplitude cos(2 pi k x))``."""
    x = grid_points(N)
    return GridProfile(N, A, A * (1.0 + amplitude * np.cos(2.0 * np.pi * k * x)))


def random_feasible(N, A, seed, modes=8, amplitude=0.9):
    """Strictly positive random smooth density with ``modes`` Fourier modes."""
    rng = np.random.default_rng(seed)
    x = grid_points(N)
    f = np.zeros(N)
    for k in range(1, modes + 1):
        a, b = rng.standard_normal(2) / k
        f += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    f -= f.mean()
    f *= amplitude / max(np.max(np.abs(f)), 1e-300)
    rho = A * (1.0 + f)
    rho *= A / rho.mean()
    return GridProfile(N, A, rho)


def detect_support(p: GridProfile, threshold_frac=1e-6) -> float:
    """Half-width of the support: cells with ``rho > threshold_frac * max``."""
    above = p.rho > threshold_frac * p.rho.max()
    if above.all():
        return 0.5
    R0 = float(np.max(np.abs(p.x[above]))) + 0.5 / p.N
    return min(R0, 0.5)


def projected_gradient_norm(rho, g, A):
    """``||rho - P(rho - g)||_inf`` with ``P`` the feasible projection."""
    return float(np.max(np.abs(rho - project_feasible(rho - g, A).rho)))


def _majorant_minimizer(conv, params: ModelParams, A):
    """Minimizer of the linearized energy over the feasible polytope."""
    e = params.local_prefactor

    def excess(lam):
        return float(np.mean(phi_prime_inverse((conv - lam) / e, params))) - A

    # Phi'^{-1} is increasing, so the mean decreases in lam
    lo = float(conv.min()) - e * 1.0
    step = 1.0
    while excess(lo) < 0:
        lo -= step
        step *= 2.0
    hi = float(conv.max())
    step = 1.0
    while excess(hi) > 0:
        hi += step
        step *= 2.0
    lam = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    rho = phi_prime_inverse((conv - lam) / e, params)
    s = rho.sum()
    if not (s > 0 and np.isfinite(s)):
        raise NumericalFailure("majorant minimizer degenerated", payload=rho)
    return rho * (A * rho.size / s)


def _energy_value(rho, K, params):
    loc = params.local_prefactor * math.fsum(phi(rho, params)) / rho.size
    return -_quadratic(rho, K) + loc


def minimize_energy(init: GridProfile, K: KernelTable, params: ModelParams,
                    opts: MinimizeOptions = MinimizeOptions()) -> MinimizeResult:
    """Minimize the total energy over feasible densities.

    Each iteration moves along ``T(rho) - rho`` (see module docstring) with
    Armijo backtracking from ``opts.step_init``.  Every ``rearrange_every``
    iterations the centred symmetric decreasing rearrangement is tried and
    kept only if it lowers the energy.  Stops when the projected-gradient
    norm drops below ``grad_tol`` or after ``max_iters`` iterations.
    """
    if K.N != init.N:
        raise ConfigurationError("kernel and profile grids differ")
    if K.m != params.m:
        raise ConfigurationError("kernel exponent differs from parameters")
    if abs(init.A - params.A) > 1e-12 * max(1.0, params.A):
        raise ConfigurationError(f"profile mean {init.A} differs from A = {params.A}")
    init.require_feasible()
    A = params.A
    rho = init.rho.copy()
    E = _energy_value(rho, K, params)
    if not math.isfinite(E):
        raise NumericalFailure("non-finite initial energy", payload=rho)
    trace = [E]
    converged = False
    gnorm = math.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = l2_gradient(rho, K, params, opts.rho_floor)
        gnorm = projected_gradient_norm(rho, g, A)
        if gnorm <= opts.grad_tol:
            converged = True
            it -= 1
            break
        target = _majorant_minimizer(K.convolve(rho), params, A)
        d = target - rho
        slope = float(np.dot(g, d)) / rho.size
        t = opts.step_init
        accepted = False
        while t > 1e-12:
            trial = np.maximum(rho + t * d, 0.0)
            Et = _energy_value(trial, K, params)
            if not math.isfinite(Et):
                raise NumericalFailure(f"non-finite energy at iteration {it}", payload=trial)
            # energies carry rounding of order eps_mach |E|; below that the
            # majorant still guarantees descent but it cannot be observed
            if Et <= E + opts.armijo_c * t * min(slope, 0.0) + ENERGY_ROUNDING * max(1.0, abs(E)):
                accepted = True
                break
            t *= opts.backtrack_factor
        if not accepted:
            # no further decrease is representable; treat as stationary
            break
        rho, E = trial, Et
        if opts.rearrange_every and it % opts.rearrange_every == 0:
            cand = center_profile(rearrange_decreasing(GridProfile(init.N, A, rho))).rho
            Ec = _energy_value(cand, K, params)
            if Ec < E:
                rho, E = cand.copy(), Ec
        trace.append(E)
    prof = GridProfile(init.N, A, rho)
    energy = total_energy(prof, K, params)
    centred = center_profile(prof)
    R0 = detect_support(centred)
    mask = prof.rho > 1e-6 * prof.rho.max()
    res = el_residual(prof, K, params, mask)
    return MinimizeResult(prof, energy, it, converged, res, R0, tuple(trace), gnorm)


def linear_growth_rate(params: ModelParams, k):
    """Growth rate of mode ``k`` about the flat state ``rho = A``.

    ``(2 pi k)^2 (2 S_m |k|^(m+1) - eps^(1-m) Phi''(A) (2 pi k)^2)``.
    """
    k = np.abs(np.asarray(k, dtype=float))
    kappa = params.local_prefactor * phi_second(params.A, params)
    q2 = (2.0 * np.pi * k) ** 2
    return q2 * (2.0 * s_constant(params.m) * k ** (params.m + 1.0) - kappa * q2)


def _phi1(z):
    """``(exp(z) - 1) / z`` with the removable point at 0."""
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def evolve_continuum(init: GridProfile, K: KernelTable, params: ModelParams, T: float, dt: float,
                     snapshot_interval=None, on_snapshot=None, max_halvings=20):
    """Integrate ``h_t = mu_xx`` to time ``T`` with an exponential integrator.

    The linearization about ``rho = A`` (destabilizing nonlocal term and
    the stabilizing ``kappa (2 pi k)^4`` term, ``kappa = eps^(1-m)
    Phi''(A)``) is integrated exactly; the remainder is explicit (first
    order exponential Euler).  A step that raises the energy by more than
    ``1e-8 |E|`` is retried with half the step, at most ``max_halvings``
    times.  ``on_snapshot(t, profile)`` is called every
    ``snapshot_interval`` time units.
    """
    if not (dt > 0 and T >= 0):
        raise ConfigurationError("need dt > 0 and T >= 0")
    if K.N != init.N or K.m != params.m:
        raise ConfigurationError("kernel does not match profile or parameters")
    if np.any(init.rho <= 0):
        raise DomainError("continuum evolution needs a strictly positive density")
    N, A = init.N, params.A
    k = np.arange(N // 2 + 1)
    sigma = linear_growth_rate(params, k)
    sigma[-1] = 0.0
    q2 = (2.0 * np.pi * k) ** 2
    D = 2j * np.pi * k
    D[-1] = 0.0

    def rho_of(H):
        return A + np.fft.irfft(D * H, n=N)

    def rhs(H):
        rho = rho_of(H)
        if np.any(rho <= 0):
            return None
        g = l2_gradient(rho, K, params)
        mu_hat = -D * np.fft.rfft(g)
        return -q2 * mu_hat

    # the Nyquist mode of the density has no grid-consistent height; drop it
    H = np.zeros(N // 2 + 1, dtype=complex)
    H[1:-1] = np.fft.rfft(init.rho - A)[1:-1] / D[1:-1]
    t = 0.0
    E = _energy_value(rho_of(H), K, params)
    next_snap = snapshot_interval if snapshot_interval else None
    if on_snapshot is not None:
        on_snapshot(0.0, GridProfile(N, A, rho_of(H)))
    h_dt = dt
    while t < T * (1 - 1e-14):
        step = min(h_dt, T - t)
        for attempt in range(max_halvings + 1):
            R = rhs(H)
            if R is None:
                raise DegenerateSlopeError(f"density touched zero at t = {t:.6g}", time=t,
                                           payload=rho_of(H))
            Nl = R - sigma * H
            z = sigma * step
            with np.errstate(over="ignore", invalid="ignore"):
                Hn = np.exp(z) * H + step * _phi1(z) * Nl
                Hn[0] = 0.0
                Hn[-1] = 0.0
                rn = rho_of(Hn)
            finite = bool(np.all(np.isfinite(rn)))
            vacuum = finite and not np.all(rn > 0)
            if finite and not vacuum:
                En = _energy_value(rn, K, params)
                if En <= E + 1e-8 * abs(E):
                    break
            step *= 0.5
        else:
            if vacuum:
                raise DegenerateSlopeError(f"density reaches zero at t = {t:.6g}", time=t, payload=rho_of(H))
            raise NumericalFailure(f"energy increase not cured by {max_halvings} halvings at t = {t:.6g}",
                                   payload=rho_of(H))
        H, E, t = Hn, En, t + step
        h_dt = min(dt, 2.0 * step) if step < h_dt else h_dt
        if next_snap is not None and on_snapshot is not None and t >= next_snap * (1 - 1e-12):
            on_snapshot(t, GridProfile(N, A, rho_of(H)))
            next_snap += snapshot_interval
    rho = rho_of(H)
    rho += A - rho.mean()
    return GridProfile(N, A, rho)
