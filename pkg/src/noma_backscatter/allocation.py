"""Power-split constraints for a fixed beamformer.

With ``w`` and ``p_t`` fixed every SINR constraint is affine in the split
``rho``.  This module builds those rows once and reuses them for the
feasibility / max-slack programs of both designs.

Gains are passed in normalized form: ``a[i] = p_t |h_i^H w|^2 / sigma^2`` and
``b[i] = alpha p_t |g_i^H w|^2 / sigma^2``.
"""

import numpy as np

from . import conic
from .model import direct_gains, forward_gain

RHO_MIN = 1e-6


def normalized_gains(params, channels, w, p_t):
    s2 = params.noise_power
    a = p_t * direct_gains(channels, w) / s2
    b = params.reflection_coeff * p_t * np.abs(channels.q) ** 2 * forward_gain(channels, w) / s2
    return a, b


def sinr_rows(params, a, b, targets, noise=1.0):
    """Rows (R, r0) such that each constraint reads R @ rho + r0 >= 0.

    ``targets`` is the length K+1 SINR target vector (tag first, on the
    gamma_0 = gamma_0'/2 scale).  Zero targets are trivially met and
    produce no row.  ``noise`` multiplies the unit noise term; setting it to
    zero yields the interference-limited rows used for initialization.
    """
    K = params.num_users
    resid = 2.0 - 2.0 * params.sic_quality
    R, r0, labels = [], [], []
    for k in range(K):
        g = targets[k + 1]
        if g <= 0:
            continue
        for i in range(k + 1):
            row = np.zeros(K)
            row[k] = a[i]
            row[:k] -= g * a[i]
            row[k + 1:] -= g * a[i] * resid[k + 1:]
            R.append(row)
            r0.append(-g * (b[i] + noise))
            labels.append((i + 1, k + 1))
    g0 = targets[0]
    if g0 > 0:
        R.append(-2.0 * g0 * a[0] * resid)
        r0.append(b[0] - 2.0 * g0 * noise)
        labels.append((0, 0))
    return np.array(R).reshape(-1, K), np.array(r0), labels


def _simplex_blocks(builder, K, nvar, rho_min):
    """rho_1 >= rho_min, nondecreasing, sums to 1 (first K variables)."""
    F = np.zeros((K, nvar))
    f = np.zeros(K)
    F[0, 0] = 1.0
    f[0] = -rho_min
    for k in range(1, K):
        F[k, k] = 1.0
        F[k, k - 1] = -1.0
    builder.nonneg(F, f, name="split")
    E = np.zeros((1, nvar))
    E[0, :K] = 1.0
    builder.equal(E, [1.0])


def max_slack_split(R, r0, K, weights=None, cap=1.0, rho_min=RHO_MIN, tol=1e-9):
    """Maximize tau subject to R rho + r0 >= weights * tau and the simplex/order rules.

    Rows are scaled to unit infinity norm unless ``weights`` is given.
    Returns ``(rho, tau)``; ``rho`` is None if the LP fails.
    """
    if K == 1:
        rho = np.ones(1)
        tau = np.inf if R.size == 0 else float(np.min((R @ rho + r0) / _row_weights(R, r0, weights)))
        return rho, min(tau, cap)
    nvar = K + 1
    bld = conic.ProgramBuilder(nvar)
    c = np.zeros(nvar)
    c[K] = -1.0
    bld.minimize(c)
    if R.size:
        wts = _row_weights(R, r0, weights)
        F = np.hstack([R / wts[:, None], -np.ones((R.shape[0], 1))])
        bld.nonneg(F, r0 / wts, name="sinr")
    cap_row = np.zeros((1, nvar))
    cap_row[0, K] = -1.0
    bld.nonneg(cap_row, [cap], name="cap")
    _simplex_blocks(bld, K, nvar, rho_min)
    sol = conic.solve(bld.build(), tol=tol)
    if not sol.usable(1e-7):
        return None, -np.inf
    rho = np.clip(sol.x[:K], 0.0, None)
    rho = np.maximum.accumulate(rho)
    rho = rho / rho.sum()
    return rho, float(sol.x[K])


def _row_weights(R, r0, weights):
    if weights is not None:
        return np.asarray(weights, dtype=float)
    return np.maximum(np.max(np.abs(R), axis=1, initial=0.0), np.abs(r0))


def split_extreme(R, r0, K, maximize=False, index=0, rho_min=0.0, tol=1e-10):
    """Smallest (or largest) feasible rho_index.  Returns None when infeasible."""
    bld = conic.ProgramBuilder(K)
    c = np.zeros(K)
    c[index] = -1.0 if maximize else 1.0
    bld.minimize(c)
    if R.size:
        wts = _row_weights(R, r0, None)
        bld.nonneg(R / wts[:, None], r0 / wts, name="sinr")
    _simplex_blocks(bld, K, K, rho_min)
    sol = conic.solve(bld.build(), tol=tol)
    if not sol.usable(1e-7):
        return None
    return float(sol.x[index])
