"""Periodic trains of atomic steps and their interaction sums.

A configuration holds ``Ns`` step positions in one period ``[0, L)``; the
train is extended periodically, ``x_{i+Ns} = x_i + L``.  Every step sum is
a symmetric pairing of the ``k``-th neighbour on the right with the
``k``-th neighbour on the left, which is the only meaningful reading of
the conditionally convergent monopole sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ._lattice import paired_sum, required_images
from .errors import ConfigurationError, DivergenceError, DomainError, NumericalFailure, TopologyError
from .special import PhysicalParams, equilibrium_spacing

__all__ = [
    "StepConfiguration",
    "DynamicsOptions",
    "Trajectory",
    "uniform_train",
    "discrete_sigma",
    "sigma_all",
    "atomistic_mu",
    "unnormalized_mu",
    "step_velocities",
    "step_dynamics",
]

DEFAULT_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class StepConfiguration:
    """``Ns`` strictly increasing step positions in ``[0, L)``."""

    L: float
    positions: np.ndarray
    lattice_a: float

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ConfigurationError("a configuration needs at least two steps per period")
        if not (math.isfinite(self.L) and self.L > 0):
            raise DomainError(f"period must be positive, got {self.L}")
        if not (math.isfinite(self.lattice_a) and self.lattice_a > 0):
            raise DomainError(f"step height must be positive, got {self.lattice_a}")
        if not np.all(np.isfinite(x)):
            raise DomainError("positions must be finite")
        if x[0] < 0 or x[-1] >= self.L:
            raise DomainError("positions must lie in [0, L)")
        if np.any(np.diff(x) <= 0):
            raise TopologyError("positions must be strictly increasing", time=None, payload=x)
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "lattice_a", float(self.lattice_a))

    @property
    def Ns(self):
        return self.positions.size

    @property
    def A(self):
        return self.Ns * self.lattice_a / self.L

    @property
    def spacings(self):
        """``x_{i+1} - x_i`` for ``i = 0..Ns-1`` (the last wraps around)."""
        x = self.positions
        return np.append(np.diff(x), x[0] + self.L - x[-1])

    def shifted(self, d):
        """Translate every step by ``d`` and re-index into ``[0, L)``."""
        y = np.mod(self.positions + d, self.L)
        y[y >= self.L] -= self.L
        return StepConfiguration(self.L, np.sort(y), self.lattice_a)


@dataclass(frozen=True)
class DynamicsOptions:
    t_end: float
    dt_init: float | None = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    min_spacing_stop: float | None = None
    snapshot_dt: float | None = None

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigurationError("t_end must be positive")
        if self.dt_init is not None and not self.dt_init > 0:
            raise ConfigurationError("dt_init must be positive")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigurationError("tolerances must be positive")
        if self.min_spacing_stop is not None and not self.min_spacing_stop >= 0:
            raise ConfigurationError("min_spacing_stop must be nonnegative")
        if self.snapshot_dt is not None and not self.snapshot_dt > 0:
            raise ConfigurationError("snapshot_dt must be positive")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of a step-flow run.

    ``positions[j]`` holds the unwrapped positions at ``times[j]``; steps
    never leave their index, so a position may drift outside ``[0, L)``.
    """

    times: np.ndarray
    positions: np.ndarray
    stopped_early: bool
    reason: str
    nfev: int = 0
    min_spacing: np.ndarray = field(default=None, repr=False)


def uniform_train(Ns, L, a) -> StepConfiguration:
    if not (isinstance(Ns, (int, np.integer)) and Ns >= 2):
        raise ConfigurationError(f"need at least two steps per period, got {Ns!r}")
    return StepConfiguration(L, np.arange(Ns) * (L / Ns), a)


def _neighbour_offsets(x, L, sites):
    """Distances to the ``r``-th right and left neighbours, ``r = 1..Ns-1``.

    Rows index ``r``, columns the requested sites.  Neighbours ``r + q Ns``
    sit a further ``q L`` away; the ``r = Ns`` pair cancels exactly.
    """
    Ns = x.size
    r = np.arange(1, Ns)[:, None]
    i = np.asarray(sites)[None, :]
    jr = i + r
    right = x[jr % Ns] + L * (jr // Ns) - x[i]
    jl = i - r
    left = x[i] - (x[jl % Ns] + L * (jl // Ns))
    return right, left


def _check_s(s):
    s = float(s)
    if not math.isfinite(s):
        raise DomainError("exponent must be finite")
    if s <= -1.0:
        raise DivergenceError(f"step sums diverge for s <= -1, got {s}")
    return s


def _sigma_sum(x, L, a, s, tol, sites, with_bound=False):
    right, left = _neighbour_offsets(x, L, sites)
    tr, tl = right / L, left / L
    scale = a * L ** (-s - 1.0)

    def bound_fn(M):
        val, b = paired_sum([(-1.0, tr, 1), (1.0, tl, 1)], s, M=M, with_bound=True)
        return scale * val.sum(axis=0), scale * b.sum(axis=0)

    _, val, bound = required_images(bound_fn, tol)
    return (val, bound) if with_bound else val


def sigma_all(c: StepConfiguration, s, tol=DEFAULT_TOL, sites=None, with_bound=False):
    """``sigma_i^(s) = a sum_{j != i} (x_j - x_i) / |x_j - x_i|^(s+2)`` at several sites.

    Neighbours are paired by order ``k`` on both sides and the periodic
    images are summed with an Euler-Maclaurin tail; the number of images
    doubles until the tail bound is below ``tol``.
    """
    s = _check_s(s)
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    sites = np.arange(c.Ns) if sites is None else np.atleast_1d(np.asarray(sites, dtype=int)) % c.Ns
    return _sigma_sum(c.positions, c.L, c.lattice_a, s, tol, sites, with_bound)


def discrete_sigma(c: StepConfiguration, i, s, tol=DEFAULT_TOL, with_bound=False):
    """``sigma_i^(s)`` for a single step ``i``."""
    out = sigma_all(c, s, tol, sites=[i], with_bound=with_bound)
    if with_bound:
        return float(out[0][0]), float(out[1][0])
    return float(out[0])


def atomistic_mu(c: StepConfiguration, p: PhysicalParams, i=None, tol=DEFAULT_TOL):
    """``sigma^(m) - (alpha2/alpha1) sigma^(n)``; all steps when ``i`` is None."""
    sites = None if i is None else [i]
    mu = sigma_all(c, p.m, tol, sites) - (p.alpha2 / p.alpha1) * sigma_all(c, p.n, tol, sites)
    return mu if i is None else float(mu[0])


def unnormalized_mu(c: StepConfiguration, p: PhysicalParams, i=None, tol=DEFAULT_TOL):
    """``-dE/dx_i`` of the pair energy with ``V' = alpha1 x^(-m-1) - alpha2 x^(-n-1)``.

    Equals ``sum_k [V'(x_{i+k} - x_i) - V'(x_i - x_{i-k})]``, i.e.
    ``(alpha1 / a)`` times :func:`atomistic_mu`.
    """
    mu = atomistic_mu(c, p, i, tol * c.lattice_a / p.alpha1)
    return (p.alpha1 / c.lattice_a) * mu


def _mu_raw(x, L, a, p, tol):
    """Unnormalized potential at every step of an ordered train (positions unwrapped)."""
    sites = np.arange(x.size)
    t = tol * a / p.alpha1
    sm = _sigma_sum(x, L, a, p.m, t, sites)
    sn = _sigma_sum(x, L, a, p.n, t, sites)
    return (p.alpha1 / a) * (sm - (p.alpha2 / p.alpha1) * sn)


def _velocity(x, L, mu):
    dist = np.append(np.diff(x), x[0] + L - x[-1])
    flux = (np.roll(mu, -1) - mu) / dist
    return -(flux - np.roll(flux, 1))


def step_velocities(c: StepConfiguration, p: PhysicalParams, tol=DEFAULT_TOL):
    """``dx_i/dt = -[(mu_{i+1} - mu_i)/(x_{i+1} - x_i) - (mu_i - mu_{i-1})/(x_i - x_{i-1})]``.

    ``mu`` is :func:`unnormalized_mu`.  With this sign the pair energy is
    nonincreasing along trajectories for a height that increases with
    ``x``.
    """
    return _velocity(c.positions, c.L, unnormalized_mu(c, p, None, tol))


def step_dynamics(c: StepConfiguration, p: PhysicalParams, opts: DynamicsOptions,
                  tol=DEFAULT_TOL) -> Trajectory:
    """Integrate the step-flow equations with an adaptive Runge-Kutta 4(5) pair.

    Stops early when the smallest spacing reaches ``opts.min_spacing_stop``
    (default ``1e-3 l_e``).  Crossing steps raise :class:`TopologyError`.
    """
    if abs(c.lattice_a - p.lattice_a) > 1e-15 * p.lattice_a:
        raise ConfigurationError("configuration and parameters disagree on the step height")
    L, Ns = c.L, c.Ns
    stop = opts.min_spacing_stop
    if stop is None:
        stop = 1e-3 * equilibrium_spacing(p)
    state = {"crossed": None}

    def spacings(x):
        return np.append(np.diff(x), x[0] + L - x[-1])

    def rhs(t, x):
        d = spacings(x)
        if np.any(d <= 0):
            state["crossed"] = (t, x.copy())
            return np.zeros_like(x)
        return _velocity(x, L, _mu_raw(x, L, c.lattice_a, p, tol))

    def near_contact(t, x):
        return float(np.min(spacings(x))) - stop

    near_contact.terminal = True
    near_contact.direction = -1

    t_eval = None
    if opts.snapshot_dt is not None:
        n = int(math.floor(opts.t_end / opts.snapshot_dt + 1e-9))
        t_eval = np.append(np.arange(n + 1) * opts.snapshot_dt, opts.t_end) if n * opts.snapshot_dt < opts.t_end \
            else np.arange(n + 1) * opts.snapshot_dt
    kw = {}
    if opts.dt_init is not None:
        kw["first_step"] = opts.dt_init
    sol = solve_ivp(rhs, (0.0, opts.t_end), c.positions.astype(float), method="RK45",
                    rtol=opts.rel_tol, atol=opts.abs_tol, events=near_contact if stop > 0 else None,
                    t_eval=t_eval, **kw)
    if state["crossed"] is not None:
        t, x = state["crossed"]
        raise TopologyError(f"steps crossed at t = {t:.6g}", time=t, payload=x)
    if sol.status < 0:
        raise NumericalFailure(f"step integration failed: {sol.message}", payload=sol.y[:, -1])
    times, X = sol.t, sol.y.T
    stopped = sol.status == 1
    reason = "completed"
    if stopped:
        te = sol.t_events[0][0]
        xe = sol.y_events[0][0]
        if times.size == 0 or times[-1] < te:
            times = np.append(times, te)
            X = np.vstack([X, xe])
        reason = "min_spacing_stop"
    gaps = np.array([np.min(spacings(x)) for x in X])
    if np.any(gaps <= 0):
        j = int(np.argmax(gaps <= 0))
        raise TopologyError(f"steps crossed at t = {times[j]:.6g}", time=float(times[j]), payload=X[j])
    return Trajectory(times, X, stopped, reason, int(sol.nfev), gaps)
