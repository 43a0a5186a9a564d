"""Paired lattice sums of power functions with an Euler-Maclaurin tail.

Every infinite sum in the package (periodic kernel, its derivative and
antiderivative, image sums of step positions, image tails of the
fractional integral) has the form

    sum_{j >= 0} sum_i c_i D^{o_i}(j + t_i)

where ``D^o`` is a member of the family built on

    q(y) = (y**(-s) - 1) / s        (q(y) = -log y when s = 0)

with ``o = -2, -1`` its first two antiderivatives, ``o = 0`` q itself and
``o >= 1`` its derivatives.  The combination must decay at infinity (the
individual sums may diverge; only the paired sum is meaningful).  Terms
``j < M`` are summed directly, the rest by Euler-Maclaurin.  ``q`` is
evaluated through ``exprel`` so that nothing cancels as ``s -> 0``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import exprel

# B_{2k} / (2k)!, k = 1..12
_BERNOULLI_OVER_FACT = np.array(
    [
        1.0 / 6.0 / 2.0,
        -1.0 / 30.0 / 24.0,
        1.0 / 42.0 / 720.0,
        -1.0 / 30.0 / 40320.0,
        5.0 / 66.0 / 3628800.0,
        -691.0 / 2730.0 / 479001600.0,
        7.0 / 6.0 / 87178291200.0,
        -3617.0 / 510.0 / 20922789888000.0,
        43867.0 / 798.0 / 6402373705728000.0,
        -174611.0 / 330.0 / 2432902008176640000.0,
        854513.0 / 138.0 / 1.1240007277776077e21,
        -236364091.0 / 2730.0 / 6.204484017332394e23,
    ]
)

DEFAULT_M = 6
DEFAULT_P = 10


def q_family(y, s, order):
    """Evaluate ``D^order q`` at ``y >= 0`` for exponent ``s``."""
    y = np.asarray(y, dtype=float)
    if order >= 1:
        r = order
        poch = 1.0
        for i in range(1, r):
            poch *= s + i
        with np.errstate(divide="ignore"):
            return (-1.0) ** r * poch * y ** (-s - r)
    with np.errstate(divide="ignore", invalid="ignore"):
        logy = np.log(y)
        # -log(y) * expm1(x)/x with x = -s log y stays exact as s -> 0
        q = -logy * exprel(-s * logy) if s != 0.0 else -logy
        if s < 0.0:
            q = np.where(y == 0.0, -1.0 / s, q)
    if order == 0:
        return q
    # y*q and y^2*q vanish at y = 0 for s < 1
    with np.errstate(invalid="ignore"):
        if order == -1:
            out = y * (q + 1.0) / (1.0 - s)
        elif order == -2:
            out = y * y * (2.0 * q + 3.0 - s) / (2.0 * (1.0 - s) * (2.0 - s))
        else:
            raise ValueError(f"unsupported order {order}")
    return np.where(y == 0.0, 0.0, out)


def paired_sum(terms, s, M=DEFAULT_M, p=DEFAULT_P, with_bound=False):
    """Sum ``sum_{j>=0} sum_i c_i D^{o_i}(j + t_i)``.

    Parameters
    ----------
    terms : list of (coef, shift, order)
        ``coef`` and ``shift`` may be arrays (broadcast together).
    s : float
        Exponent of the power family.
    M : int
        Number of leading terms summed directly.
    p : int
        Number of Bernoulli corrections in the tail (at most 11).
    with_bound : bool
        Also return the magnitude of the first omitted correction.
    """
    if p > len(_BERNOULLI_OVER_FACT) - 1:
        raise ValueError("too many Euler-Maclaurin corrections requested")
    total = 0.0
    for c, t, o in terms:
        t = np.asarray(t, dtype=float)
        j = np.arange(M, dtype=float).reshape((-1,) + (1,) * t.ndim)
        total = total + np.asarray(c) * q_family(j + t, s, o).sum(axis=0)
    tail = 0.0
    for c, t, o in terms:
        y = np.asarray(t, dtype=float) + M
        c = np.asarray(c)
        tail = tail - c * q_family(y, s, o - 1) + 0.5 * c * q_family(y, s, o)
        for k in range(1, p + 1):
            tail = tail - _BERNOULLI_OVER_FACT[k - 1] * c * q_family(y, s, o + 2 * k - 1)
    total = total + tail
    if not with_bound:
        return total
    bound = 0.0
    for c, t, o in terms:
        y = np.asarray(t, dtype=float) + M
        bound = bound + _BERNOULLI_OVER_FACT[p] * np.asarray(c) * q_family(y, s, o + 2 * p + 1)
    return total, np.abs(bound)


def required_images(bound_fn, tol, M0=DEFAULT_M, max_M=1 << 20):
    """Smallest ``M = M0 * 2**k`` whose reported tail bound is below ``tol``."""
    M = M0
    while True:
        val, bound = bound_fn(M)
        if np.all(bound < tol) or M >= max_M:
            return M, val, bound
        M *= 2

