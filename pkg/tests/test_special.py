import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from stepbunch.errors import DomainError, SingularityError
from stepbunch.special import (
    ModelParams,
    PhysicalParams,
    derive_model_params,
    equilibrium_spacing,
    eta,
    gamma_fn,
    s_constant,
    zeta,
)


def test_zeta_reference_values():
    assert zeta(2.0) == pytest.approx(math.pi ** 2 / 6, rel=1e-14)
    assert zeta(0.0) == -0.5
    assert zeta(-1.0) == pytest.approx(-1.0 / 12.0, rel=1e-13)
    assert zeta(-2.0) == 0.0
    assert zeta(4.0) == pytest.approx(math.pi ** 4 / 90, rel=1e-14)


def _zeta_em(s, n=20, p=8):
    """Euler-Maclaurin corrected partial sum in extended precision."""
    with mpmath.workdps(40):
        s = mpmath.mpf(s)
        tot = mpmath.fsum(mpmath.power(k, -s) for k in range(1, n))
        tot += mpmath.power(n, 1 - s) / (s - 1) + mpmath.power(n, -s) / 2
        fall = s
        for j in range(1, p + 1):
            tot += mpmath.bernoulli(2 * j) / mpmath.factorial(2 * j) * fall * mpmath.power(n, -s - 2 * j + 1)
            fall *= (s + 2 * j - 1) * (s + 2 * j)
        return float(tot)


def test_zeta_matches_corrected_partial_sums():
    pts = np.linspace(-10.0, 10.0, 50)
    pts = pts[np.abs(pts - 1.0) > 1e-9]
    for s in pts:
        ref = _zeta_em(s)
        assert abs(zeta(s) - ref) <= 1e-10 * max(1.0, abs(ref)), s


def _near_trivial_zero(s):
    return s < -1.0 and abs(s / 2.0 - round(s / 2.0)) < 1e-3


@given(st.floats(-30.0, 30.0).filter(lambda s: abs(s - 1.0) > 1e-3 and abs(s) > 1e-12 and not _near_trivial_zero(s)))
def test_zeta_relative_accuracy(s):
    ref = float(mpmath.zeta(s))
    assert zeta(s) == pytest.approx(ref, rel=1e-12)


@given(st.floats(-1e-3, 1e-3))
def test_zeta_smooth_through_zero(s):
    # 1 - s may round to 1; the value must stay finite and close to -1/2
    assert abs(zeta(s) + 0.5 + 0.5 * math.log(2 * math.pi) * s) <= 2.0 * s * s + 1e-15


def test_zeta_errors():
    with pytest.raises(SingularityError):
        zeta(1.0)
    with pytest.raises(DomainError):
        zeta(float("nan"))
    with pytest.raises(DomainError):
        zeta(float("inf"))


def test_eta_values():
    assert eta(1.0) == pytest.approx(math.log(2.0), rel=1e-15)
    assert eta(0.0) == pytest.approx(0.5, rel=1e-15)
    assert eta(2.0) == pytest.approx(math.pi ** 2 / 12, rel=1e-14)
    with pytest.raises(DomainError):
        eta(float("nan"))


@given(st.floats(-20.0, 20.0).filter(lambda s: abs(s) > 1e-12 and not _near_trivial_zero(s)))
def test_eta_against_mpmath(s):
    ref = float(mpmath.altzeta(s))
    assert eta(s) == pytest.approx(ref, rel=1e-11, abs=1e-14)


@given(st.floats(-20.0, 25.0).filter(lambda x: abs(x - round(x)) > 1e-6 or x > 0.5))
def test_gamma_against_math(x):
    assert gamma_fn(x) == pytest.approx(math.gamma(x), rel=1e-12)


def _s_by_quadrature(m):
    """Defining integral: first half-period with the z**-m part done exactly,
    remaining half-periods summed with series acceleration."""
    with mpmath.workdps(30):
        pi = mpmath.pi
        f = lambda z: z ** (-m - 1) * mpmath.sin(z)
        head = mpmath.quad(lambda z: z ** (-m - 1) * (mpmath.sin(z) - z), [0, pi]) + pi ** (1 - m) / (1 - m)
        tail = mpmath.nsum(lambda k: mpmath.quad(f, [k * pi, (k + 1) * pi]), [1, mpmath.inf])
        return float((2 * pi) ** (m + 1) * (head + tail))


def test_s_constant_values():
    assert s_constant(0.0) == pytest.approx(math.pi ** 2, rel=1e-15)
    assert s_constant(-0.5) == pytest.approx(math.pi, rel=1e-13)


@pytest.mark.parametrize("m", [-0.9, -0.5, -0.2, 0.3, 0.5, 0.9, 0.99])
def test_s_constant_against_oscillatory_quadrature(m):
    assert s_constant(m) == pytest.approx(_s_by_quadrature(m), rel=1e-8)
    assert s_constant(m) > 0


def test_s_constant_continuous_at_zero():
    for m in (1e-6, -1e-6):
        assert abs(s_constant(m) - math.pi ** 2) <= 1e-4
    with pytest.raises(DomainError):
        s_constant(1.0)
    with pytest.raises(DomainError):
        s_constant(-1.0)


def test_derive_model_params_examples():
    p = derive_model_params(PhysicalParams(1.0, 1.0, 0.01, 0.0, 2.0), 1.0)
    assert p.epsilon == pytest.approx(0.005, rel=1e-14)
    assert p.gamma == pytest.approx(math.pi ** 2 * 1e4, rel=1e-12)
    p = derive_model_params(PhysicalParams(1.0, 1.0, 1.0, 0.0, 2.0), 1.0)
    assert p.epsilon == pytest.approx(0.5, rel=1e-14)
    assert p.gamma == pytest.approx(math.pi ** 2, rel=1e-12)


@given(
    st.floats(-0.95, 0.95),
    st.floats(1.05, 4.0),
    st.floats(0.1, 10.0),
    st.floats(0.1, 10.0),
    st.floats(1e-3, 1.0),
)
def test_derived_parameters_positive_and_consistent(m, n, a1, a2, a):
    pp = PhysicalParams(a1, a2, a, m, n)
    p = derive_model_params(pp, 1.0)
    assert p.epsilon > 0 and p.gamma > 0
    lhs = p.gamma * p.epsilon ** (1 - m)
    rhs = (a2 * a ** m / (a1 * a ** n)) * (n + 1) * zeta(n) * a ** (1 - m)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_equilibrium_spacing_examples():
    assert equilibrium_spacing(PhysicalParams(1.0, 4.0, 1.0, 0.0, 2.0)) == pytest.approx(2.0, rel=1e-15)
    for m, n in [(0.0, 2.0), (-0.5, 3.0), (0.7, 1.2)]:
        assert equilibrium_spacing(PhysicalParams(2.0, 2.0, 1.0, m, n)) == pytest.approx(1.0, rel=1e-15)


@given(st.floats(-0.95, 0.95), st.floats(1.05, 4.0), st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_equilibrium_spacing_is_force_free(m, n, a1, a2):
    pp = PhysicalParams(a1, a2, 1.0, m, n)
    le = equilibrium_spacing(pp)
    scale = a1 * le ** (-m - 1)
    assert abs(pp.potential_derivative(le)) <= 1e-12 * scale


def test_parameter_validation():
    with pytest.raises(DomainError):
        ModelParams(1.5, 2.0, 0.1, 1.0, 1.0)
    with pytest.raises(DomainError):
        ModelParams(0.0, 0.9, 0.1, 1.0, 1.0)
    with pytest.raises(DomainError):
        ModelParams(0.0, 2.0, -0.1, 1.0, 1.0)
    with pytest.raises(DomainError):
        PhysicalParams(1.0, 0.0, 1.0, 0.0, 2.0)
