"""Singular Euler-Maclaurin sums and discrete-versus-continuum comparisons.

Test surfaces are periodic perturbations of a linear profile written in
the inverse form ``x(h) = h/A + delta psi(h)`` with
``psi(h) = sum_j c_j sin(2 pi w_j h) / (2 pi w_j)``.  Steps of height ``a``
sit at ``x_i = x(i a)``; the continuum density is ``rho = 1/x_h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma as _gamma, gammaincc, roots_jacobi, roots_legendre

from ._lattice import paired_sum
from .discrete import StepConfiguration, atomistic_mu
from .energy import nonlocal_potential_spectral
from .errors import ConfigurationError, DomainError, SurfaceInversionError
from .profile import GridProfile
from .special import ModelParams, PhysicalParams, derive_model_params, zeta

__all__ = [
    "TestSurface",
    "SingularIntegrand",
    "exponential_integrand",
    "euler_maclaurin_singular",
    "convergence_table",
    "g_integral",
    "sigma_asymptotic_prediction",
    "sampled_configuration",
    "continuum_mu_on_surface",
    "ConsistencyRow",
    "consistency_experiment",
    "dipole_ratio_for_gamma",
]


@dataclass(frozen=True)
class TestSurface:
    """``x(h) = h/A + delta psi(h)`` with a finite sine series ``psi``.

    ``modes`` lists ``(c_j, w_j)`` pairs with positive integer frequencies;
    the default is the single mode ``sin(2 pi h) / (2 pi)``.
    """

    __test__ = False  # not a pytest class

    A: float
    delta: float
    modes: tuple = ((1.0, 1),)

    def __post_init__(self):
        if not (math.isfinite(self.A) and self.A > 0):
            raise DomainError(f"mean slope must be positive, got {self.A}")
        if not math.isfinite(self.delta):
            raise DomainError("delta must be finite")
        modes = tuple((float(c), int(w)) for c, w in self.modes)
        if not modes or any(w < 1 for _, w in modes):
            raise ConfigurationError("modes need positive integer frequencies")
        object.__setattr__(self, "modes", modes)
        if self.p0 <= 0:
            raise DomainError(
                f"x_h must stay positive: delta sup|psi'| = {abs(self.delta) * self._psi1_sup:.6g} >= 1/A"
            )

    @property
    def _psi1_sup(self):
        return sum(abs(c) for c, _ in self.modes)

    @property
    def p0(self):
        """Lower bound ``1/A - |delta| sup|psi'|`` of ``x_h``."""
        return 1.0 / self.A - abs(self.delta) * self._psi1_sup

    @property
    def period(self):
        return 1.0 / self.A

    def psi(self, h, order=0):
        h = np.asarray(h, dtype=float)
        out = np.zeros_like(h)
        for c, w in self.modes:
            q = 2.0 * math.pi * w
            # d^r/dh^r sin(q h) = q^r sin(q h + r pi/2)
            out = out + c * q ** (order - 1) * np.sin(q * h + 0.5 * math.pi * order)
        return out

    def x(self, h):
        return np.asarray(h, dtype=float) / self.A + self.delta * self.psi(h)

    def x_h(self, h):
        return 1.0 / self.A + self.delta * self.psi(h, 1)

    def x_hh(self, h):
        return self.delta * self.psi(h, 2)

    def second_difference(self, xi, t):
        """``psi(xi + t) + psi(xi - t) - 2 psi(xi)`` without cancellation."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, w in self.modes:
            q = 2.0 * math.pi * w
            out = out - 4.0 * c * math.sin(q * xi) / q * np.sin(0.5 * q * t) ** 2
        return out

    def invert(self, x, tol=1e-14, max_iter=60):
        """Solve ``x(h) = x`` by safeguarded Newton iteration."""
        x = np.asarray(x, dtype=float)
        h = self.A * x
        for _ in range(max_iter):
            f = self.x(h) - x
            dh = f / self.x_h(h)
            h = h - dh
            if np.all(np.abs(dh) <= tol * np.maximum(1.0, np.abs(h))):
                return h
        raise SurfaceInversionError(f"Newton inversion did not reach {tol:g}", payload=h)


@dataclass(frozen=True)
class SingularIntegrand:
    """Smooth factor ``g`` of ``G(h) = h^(-m) g(h)`` on ``[0, inf)``.

    ``derivatives[r]`` is ``g^(r)(0)``.  The decay certificate asserts
    ``|g(h)| <= decay_const exp(-decay_rate h)``.
    """

    g: Callable
    derivatives: Sequence[float]
    decay_rate: float
    decay_const: float = 1.0

    def __post_init__(self):
        if not (self.decay_rate > 0 and self.decay_const > 0):
            raise ConfigurationError("the decay certificate needs positive constants")


def exponential_integrand(order=12) -> SingularIntegrand:
    """``g(h) = exp(-h)`` with ``g^(r)(0) = (-1)^r``."""
    return SingularIntegrand(lambda h: np.exp(-h), [(-1.0) ** r for r in range(order)], 1.0, 1.0)


def _tail_bound(f: SingularIntegrand, m, a, H):
    b, C = f.decay_rate, f.decay_const
    integral = C * b ** (m - 1.0) * _gamma(1.0 - m) * gammaincc(1.0 - m, b * H)
    return integral + a * C * H ** (-m) * math.exp(-b * H)


def euler_maclaurin_singular(f: SingularIntegrand, m, a, p, omit=(), block=4096):
    """Corrected trapezoid sum for ``int_0^inf h^(-m) g(h) dh``.

    Returns ``a sum_{j>=1} G(j a) - sum_{r<2p} zeta(m-r)/r! g^(r)(0) a^(r-m+1)``.
    Orders listed in ``omit`` are left out of the correction.  The sum is
    cut once the certified tail falls below ``1e-15`` of the partial sum.
    """
    m = float(m)
    if not (math.isfinite(m) and m < 1.0):
        raise DomainError(f"need m < 1, got {m}")
    if not (a > 0 and math.isfinite(a)):
        raise DomainError(f"step must be positive, got {a}")
    if not (isinstance(p, (int, np.integer)) and p >= 1):
        raise ConfigurationError(f"p must be a positive integer, got {p!r}")
    if len(f.derivatives) < 2 * p:
        raise ConfigurationError(f"need {2 * p} derivatives at 0, got {len(f.derivatives)}")
    parts = []
    j0 = 1
    while True:
        h = a * np.arange(j0, j0 + block, dtype=float)
        parts.extend((h ** (-m) * f.g(h)).tolist())
        j0 += block
        partial = math.fsum(parts)
        H = a * (j0 - 0.5)
        if _tail_bound(f, m, a, H) < 1e-15 * max(abs(a * partial), 1e-300):
            break
        if j0 > 1 << 26:
            raise ConfigurationError("the sum did not reach its tail tolerance")
    total = a * math.fsum(parts)
    corr = []
    for r in range(2 * p):
        if r in omit:
            continue
        z = zeta(m - r)
        if z == 0.0:
            continue
        corr.append(z / math.factorial(r) * f.derivatives[r] * a ** (r - m + 1.0))
    return total - math.fsum(corr)


def convergence_table(f: SingularIntegrand, m, p, exact, a_list, omit=(), floor=1e-14):
    """Rows ``(a, error, observed_order)`` over a dyadic list of steps.

    The observed order between consecutive steps is
    ``log2(err_k / err_{k+1}) / log2(a_k / a_{k+1})``; it is NaN when either
    error is within ``floor * |exact|`` of rounding.
    """
    rows = []
    prev = None
    for a in a_list:
        err = abs(euler_maclaurin_singular(f, m, a, p, omit) - exact)
        order = math.nan
        if prev is not None:
            a0, e0 = prev
            noise = floor * max(1.0, abs(exact))
            if e0 > noise and err > noise:
                order = math.log(e0 / err) / math.log(a0 / a)
        rows.append((a, err, order))
        prev = (a, err)
    return rows


def _gauss_nodes(n, s):
    """Gauss-Jacobi on [0, 1] for weight ``t^(-s)`` and Gauss-Legendre on [0, 1]."""
    tj, wj = roots_jacobi(n, 0.0, -s)
    tj = 0.5 * (tj + 1.0)
    wj = wj * 0.5 ** (1.0 - s)
    tl, wl = roots_legendre(n)
    return tj, wj, 0.5 * (tl + 1.0), 0.5 * wl


def g_integral(ts: TestSurface, xi, s, nodes=48):
    """``int_0^inf G_s(h; xi) dh`` for ``-1 < s < 1`` by periodic folding.

    ``G_s(h; xi) = (x(xi+h) - x(xi))^(-s-1) - (x(xi) - x(xi-h))^(-s-1)``.
    Writing ``h = k + t`` with ``t`` in ``[0, 1)`` gives
    ``x(xi+k+t) - x(xi) = (k + U(t))/A`` and the sum over ``k`` is a paired
    lattice sum; the ``k = 0`` term carries the ``t^(-s)`` singularity and
    is integrated by Gauss-Jacobi, the rest by Gauss-Legendre.
    """
    s = float(s)
    if not -1.0 < s < 1.0:
        raise DomainError(f"the h-integral needs -1 < s < 1, got {s}")
    A, d = ts.A, ts.delta
    tj, wj, tl, wl = _gauss_nodes(nodes, s)

    def uv(t):
        u = t + A * d * (ts.psi(xi + t) - ts.psi(xi))
        v = t + A * d * (ts.psi(xi) - ts.psi(xi - t))
        return u, v

    u, v = uv(tj)
    # u^(-s-1) - v^(-s-1) with u - v = A delta (second difference of psi)
    diff = A * d * ts.second_difference(xi, tj)
    near = v ** (-s - 1.0) * np.expm1((-s - 1.0) * np.log1p(diff / v))
    k0 = float(np.dot(wj, tj ** s * near))
    u, v = uv(tl)
    far = paired_sum([(-1.0, 1.0 + u, 1), (1.0, 1.0 + v, 1)], s)
    k1 = float(np.dot(wl, far))
    return A ** (s + 1.0) * (k0 + k1)


def sigma_asymptotic_prediction(ts: TestSurface, xi, s, a, p_phys: PhysicalParams | None = None):
    """Leading-order prediction of ``sigma^(s)`` at the step ``x(xi)``.

    ``-1 < s < 1``: ``int_0^inf G_s dh - (s+1) zeta(s) a^(1-s) x_hh x_h^(-s-2)``.
    ``s > 1``: ``-(s+1) zeta(s) a^(1-s) x_hh x_h^(-s-2)``.
    ``p_phys`` is accepted for symmetry with the discrete calls and unused.
    """
    s = float(s)
    if s == 1.0:
        raise DomainError("s = 1 is not supported")
    if s <= -1.0:
        raise DomainError(f"need s > -1, got {s}")
    corr = -(s + 1.0) * zeta(s) * a ** (1.0 - s) * float(ts.x_hh(xi)) * float(ts.x_h(xi)) ** (-s - 2.0)
    if s > 1.0:
        return corr
    return g_integral(ts, xi, s) + corr


def sampled_configuration(ts: TestSurface, a) -> StepConfiguration:
    """Steps ``x_i = x(i a)``, ``i = 0..1/a - 1``, with period ``1/A``."""
    Ns = int(round(1.0 / a))
    if Ns < 2 or abs(Ns * a - 1.0) > 1e-12:
        raise ConfigurationError(f"1/a must be an integer >= 2, got a = {a}")
    pos = ts.x(np.arange(Ns) * a)
    return StepConfiguration(ts.period, pos, a)


def _nonlocal_at(ts: TestSurface, m, x, N):
    """Nonlocal part of the continuum potential at the points ``x``."""
    L = ts.period
    out = np.empty(np.size(x))
    for idx, x0 in enumerate(np.atleast_1d(x)):
        # sample on a grid whose centre sits at x0; the spectral operator is
        # translation invariant, so index N/2 holds the value at x0
        X = x0 / L + (-0.5 + np.arange(N) / N)
        h = ts.invert(L * X)
        rho = 1.0 / ts.x_h(h)
        prof = GridProfile(N, float(rho.mean()), rho)
        out[idx] = L ** (-m) * nonlocal_potential_spectral(prof, m)[N // 2]
    return out


def continuum_mu_on_surface(ts: TestSurface, params: ModelParams, x, N=256, parts=False):
    """Continuum chemical potential at ``x`` for the surface ``h = x^(-1)``.

    Nonlocal part: ``-P.V. int (x-y) h_x(y) / |x-y|^(m+2) dy``, evaluated
    spectrally on the ``1/A``-periodic density.  Local part:
    ``-eps^(1-m) (h_x^(m-1) + gamma h_x^(n-1)) h_xx`` from ``x_h`` and
    ``x_hh``.  With ``parts=True`` returns ``(nonlocal, local)``.
    """
    if abs(params.A - ts.A) > 1e-12 * ts.A:
        raise ConfigurationError("surface and parameters disagree on the mean slope")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    nl = _nonlocal_at(ts, params.m, xs, N)
    h = ts.invert(xs)
    xh, xhh = ts.x_h(h), ts.x_hh(h)
    hx = 1.0 / xh
    hxx = -xhh / xh ** 3
    loc = -params.local_prefactor * (hx ** (params.m - 1.0) + params.gamma * hx ** (params.n - 1.0)) * hxx
    if parts:
        return (float(nl[0]), float(loc[0])) if scalar else (nl, loc)
    out = nl + loc
    return float(out[0]) if scalar else out


def dipole_ratio_for_gamma(gamma, m, n, a):
    """``alpha2/alpha1`` giving the dipole weight ``gamma`` at step height ``a``."""
    return gamma * a ** (n - m) * (m + 1.0) * abs(zeta(m)) / ((n + 1.0) * zeta(n))


@dataclass(frozen=True)
class ConsistencyRow:
    a: float
    mu_atomistic: float
    mu_continuum: float
    ratio: float
    epsilon: float = field(default=math.nan)


def consistency_experiment(ts: TestSurface, p_phys: PhysicalParams, a_list, xi=0.25, N=256, tol=1e-14):
    """Tabulate ``(mu^a - mu) / eps^(1-m)`` at the step ``x(xi)`` for each ``a``.

    The dipole weight ``gamma`` of ``p_phys`` is held fixed: for every ``a``
    the ratio ``alpha2/alpha1`` is rescaled so that the derived ``gamma``
    does not change.
    """
    a_list = [float(a) for a in a_list]
    if any(b >= a for a, b in zip(a_list, a_list[1:])):
        raise ConfigurationError("a_list must be strictly decreasing")
    gamma = derive_model_params(p_phys, ts.A).gamma
    m, n = p_phys.m, p_phys.n
    rows = []
    for a in a_list:
        i = xi / a
        if abs(i - round(i)) > 1e-9:
            raise ConfigurationError(f"test site h = {xi} is not a multiple of a = {a}")
        pp = PhysicalParams(p_phys.alpha1, p_phys.alpha1 * dipole_ratio_for_gamma(gamma, m, n, a), a, m, n)
        params = derive_model_params(pp, ts.A)
        cfg = sampled_configuration(ts, a)
        mu_a = atomistic_mu(cfg, pp, int(round(i)), tol)
        mu_c = continuum_mu_on_surface(ts, params, float(ts.x(xi)), N)
        e = params.local_prefactor
        rows.append(ConsistencyRow(a, mu_a, mu_c, (mu_a - mu_c) / e, params.epsilon))
    return rows
