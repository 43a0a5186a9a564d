import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stepbunch.kernel import build_kernel_table
from stepbunch.profile import GridProfile, grid_points

settings.register_profile(
    "pkg", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("pkg")


@functools.lru_cache(maxsize=None)
def kernel_table(m, N):
    return build_kernel_table(m, N)


@pytest.fixture
def kt():
    return kernel_table


def smooth_density(N, A, rng, modes=6, floor=0.05):
    """Random strictly positive trigonometric density with mean ``A``."""
    x = grid_points(N)
    f = np.zeros(N)
    for k in range(1, modes + 1):
        a, b = rng.standard_normal(2) / k
        f += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    f *= (1.0 - floor) / np.max(np.abs(f))
    rho = A * (1.0 + f)
    rho += A - rho.mean()
    return GridProfile(N, A, rho)


def rough_density(N, A, rng, zero_frac=0.3):
    """Random nonnegative density with exact zeros and jumps."""
    rho = rng.exponential(size=N)
    rho[rng.random(N) < zero_frac] = 0.0
    rho *= A * N / rho.sum()
    rho += (A - rho.mean()) * (rho > 0) / max(np.mean(rho > 0), 1e-300)
    return GridProfile(N, A, np.maximum(rho, 0.0))
