"""Exponential integral on the negative real axis.

Only the branch ``x < 0`` is needed by the ergodic tag rate, so everything
here is written in terms of ``E1(z) = -Ei(-z)`` for ``z > 0``.
"""

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061

_SERIES_SWITCH = 1.0
_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 500
_ASYMPTOTIC_SWITCH = 1e8


def _e1_series(z):
    # E1(z) = -gamma - ln z - sum_{n>=1} (-z)^n / (n n!)
    total = 0.0
    term = 1.0
    for n in range(1, _MAX_TERMS):
        term *= -z / n
        contrib = term / n
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return -EULER_GAMMA - math.log(z) - total


def _e1_scaled_cf(z):
    """exp(z) * E1(z) by the modified Lentz continued fraction (z > 1)."""
    b = z + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"continued fraction for E1({z}) did not converge")


def e1_scaled(z):
    """Return ``exp(z) * E1(z)`` for ``z > 0`` without overflow."""
    z = float(z)
    if not z > 0.0:
        raise ValueError(f"e1_scaled needs z > 0, got {z}")
    if z <= _SERIES_SWITCH:
        return math.exp(z) * _e1_series(z)
    if z >= _ASYMPTOTIC_SWITCH:
        # 1/z (1 - 1/z + 2/z^2); the next term is below 1e-24 relative
        if math.isinf(z):
            return 0.0
        u = 1.0 / z
        return u * (1.0 - u + 2.0 * u * u)
    return _e1_scaled_cf(z)


def exp_integral_ei(x):
    """Exponential integral Ei(x) for x < 0.

    Uses the power series for ``|x| <= 1`` and a continued fraction beyond.
    Raises ``ValueError`` for ``x >= 0`` (outside the range the rate model uses).
    """
    x = float(x)
    if math.isnan(x) or x >= 0.0:
        raise ValueError(f"exp_integral_ei is defined here for x < 0 only, got {x}")
    z = -x
    if z <= _SERIES_SWITCH:
        return -_e1_series(z)
    if z > 745.0:
        # exp(-z) underflows; Ei(x) is a negative number smaller than any double
        return -0.0
    return -_e1_scaled_cf(z) * math.exp(-z)


exp_integral_ei_vec = np.vectorize(exp_integral_ei, otypes=[float])
