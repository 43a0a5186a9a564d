"""Special functions and parameter records.

Real-axis Riemann zeta and Dirichlet eta, a Lanczos gamma function, the
oscillatory constant ``S_m`` of the Fourier form of the nonlocal energy,
and the conversion from physical step-interaction constants to the
dimensionless continuum parameters ``(epsilon, gamma)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, SingularityError

__all__ = [
    "PhysicalParams",
    "ModelParams",
    "gamma_fn",
    "zeta",
    "eta",
    "s_constant",
    "derive_model_params",
    "equilibrium_spacing",
]

# Lanczos coefficients, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _check_finite(s, name="s"):
    s = float(s)
    if not math.isfinite(s):
        raise DomainError(f"{name} must be finite, got {s!r}")
    return s


def _sin_half_pi(s):
    """sin(pi*s/2) with the argument reduced exactly, accurate near zeros."""
    half = 0.5 * s
    k = round(half)
    f = half - k  # exact for |s| < 2**52
    v = math.sin(math.pi * f)
    return -v if k % 2 else v


def gamma_fn(x):
    """Gamma function on the real line via the Lanczos approximation."""
    x = _check_finite(x, "x")
    if x <= 0 and x == math.floor(x):
        raise SingularityError(f"gamma has a pole at {x}")
    if x < 0.5:
        # reflection; sin(pi x) evaluated with exact reduction
        return math.pi / (_sin_half_pi(2.0 * x) * gamma_fn(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_C[0]
    for i in range(1, len(_LANCZOS_C)):
        acc += _LANCZOS_C[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def _borwein_weights(n):
    d = [0.0] * (n + 1)
    term = 1.0 / n
    acc = term
    d[0] = n * acc
    for i in range(1, n + 1):
        term *= (n + i - 1) * (2 * (n - i + 1)) * 2.0 / ((2 * i - 1) * (2 * i))
        acc += term
        d[i] = n * acc
    return d


_BORWEIN_N = 48
_BORWEIN_D = _borwein_weights(_BORWEIN_N)


def _eta_series(s):
    """Dirichlet eta for s > 0 by Borwein's accelerated alternating sum."""
    n = _BORWEIN_N
    d = _BORWEIN_D
    total = 0.0
    for k in range(n):
        term = (d[k] - d[n]) / (k + 1.0) ** s
        total += -term if k % 2 else term
    return -total / d[n]


def zeta(s):
    """Riemann zeta function for real ``s != 1``.

    Uses the accelerated eta series for ``s > -1/2`` and the functional
    equation below that.
    """
    s = _check_finite(s)
    if s == 1.0:
        raise SingularityError("zeta has a pole at s = 1")
    if s == 0.0:
        return -0.5
    if s > -0.5:
        # 1 - 2**(1-s) without cancellation near s = 1
        return _eta_series(s) / -math.expm1((1.0 - s) * math.log(2.0))
    if s == math.floor(s) and int(s) % 2 == 0:
        return 0.0
    return (
        2.0 ** s
        * math.pi ** (s - 1.0)
        * _sin_half_pi(s)
        * gamma_fn(1.0 - s)
        * zeta(1.0 - s)
    )


def eta(s):
    """Dirichlet eta ``(1 - 2**(1-s)) * zeta(s)``; ``eta(1) = log 2``."""
    s = _check_finite(s)
    if s == 1.0:
        return math.log(2.0)
    if s > -0.5:
        return _eta_series(s)
    return -math.expm1((1.0 - s) * math.log(2.0)) * zeta(s)


def s_constant(m):
    """``S_m = (2 pi)^(m+1) * int_0^inf z^(-m-1) sin z dz`` for -1 < m < 1.

    Closed form ``(2 pi)^(m+1) Gamma(1-m) sin(pi m / 2) / m``, continuous
    at ``m = 0`` where it equals ``pi**2``.
    """
    m = _check_finite(m, "m")
    if not -1.0 < m < 1.0:
        raise DomainError(f"s_constant requires -1 < m < 1, got {m}")
    if m == 0.0:
        return math.pi ** 2
    ratio = _sin_half_pi(m) / m
    return (2.0 * math.pi) ** (m + 1.0) * gamma_fn(1.0 - m) * ratio


def _check_exponents(m, n):
    if not (math.isfinite(m) and math.isfinite(n)):
        raise DomainError("exponents must be finite")
    if not (-1.0 < m < 1.0 < n):
        raise DomainError(f"exponents must satisfy -1 < m < 1 < n, got m={m}, n={n}")


@dataclass(frozen=True)
class PhysicalParams:
    """Lennard-Jones (m, n) step interaction constants."""

    alpha1: float
    alpha2: float
    lattice_a: float
    m: float
    n: float

    def __post_init__(self):
        _check_exponents(self.m, self.n)
        for name in ("alpha1", "alpha2", "lattice_a"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v}")

    def potential_derivative(self, x):
        """V'(x) = alpha1 x^(-m-1) - alpha2 x^(-n-1) for x > 0."""
        return self.alpha1 * x ** (-self.m - 1.0) - self.alpha2 * x ** (-self.n - 1.0)


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless continuum parameters.

    ``epsilon`` is the regularization length; the local energy carries the
    prefactor ``epsilon**(1 - m)``.
    """

    m: float
    n: float
    epsilon: float
    gamma: float
    A: float

    def __post_init__(self):
        _check_exponents(self.m, self.n)
        for name in ("epsilon", "gamma", "A"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v}")

    @property
    def local_prefactor(self):
        return self.epsilon ** (1.0 - self.m)

    def replace(self, **changes):
        fields = dict(m=self.m, n=self.n, epsilon=self.epsilon, gamma=self.gamma, A=self.A)
        fields.update(changes)
        return ModelParams(**fields)


def derive_model_params(p: PhysicalParams, A: float) -> ModelParams:
    """Continuum parameters from physical constants and mean slope ``A``.

    ``epsilon**(1-m) = (m+1)|zeta(m)| a**(1-m)`` and
    ``gamma = alpha2 a^m / (alpha1 a^n) * (n+1) zeta(n) / ((m+1)|zeta(m)|)``.
    """
    m, n, a = p.m, p.n, p.lattice_a
    zm = abs(zeta(m))
    zn = zeta(n)
    eps = ((m + 1.0) * zm) ** (1.0 / (1.0 - m)) * a
    gam = (p.alpha2 * a ** m) / (p.alpha1 * a ** n) * (n + 1.0) * zn / ((m + 1.0) * zm)
    return ModelParams(m=m, n=n, epsilon=eps, gamma=gam, A=A)


def equilibrium_spacing(p: PhysicalParams) -> float:
    """Spacing ``(alpha2/alpha1)**(1/(n-m))`` where V'(l) = 0."""
    return (p.alpha2 / p.alpha1) ** (1.0 / (p.n - p.m))
