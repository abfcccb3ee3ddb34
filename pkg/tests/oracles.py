"""Independent reference computations used by the tests.

Nothing here imports the solver modules; formulas are recoded from scratch
with explicit loops so a shared bug cannot hide on both sides.
"""

import itertools
import math

import numpy as np
from scipy import integrate


def ei_quadrature(x):
    """Ei(x) for x < 0 as -int_1^inf exp(x t)/t dt."""
    val, _ = integrate.quad(lambda t: math.exp(x * t) / t, 1.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=500)
    return -val


def ergodic_tag_rate_quadrature(g):
    """int_0^inf e^{-t} log2(1 + g t) dt."""
    val, _ = integrate.quad(lambda t: math.exp(-t) * math.log2(1.0 + g * t), 0.0, np.inf,
                            epsabs=1e-14, epsrel=1e-13, limit=500)
    return val


def sinr_loop(h, g, w, rho, p, s2, alpha, xi, i, k):
    """gamma_i^k with explicit sums over the interfering sets (1-based i, k)."""
    K = len(rho)
    hw = abs(np.vdot(h[i - 1], w)) ** 2
    gw = abs(np.vdot(g[i - 1], w)) ** 2
    interf = 0.0
    for j in range(1, K + 1):
        if j < k:
            interf += rho[j - 1] * p * hw
        elif j > k:
            interf += rho[j - 1] * (2 - 2 * xi[j - 1]) * p * hw
    return rho[k - 1] * p * hw / (interf + alpha * p * gw + s2)


def perfect_sic_sinr(h, g, w, rho, p, s2, alpha, i, k):
    """gamma_i^k assuming the weaker users' signals are removed entirely."""
    hw = abs(np.vdot(h[i - 1], w)) ** 2
    gw = abs(np.vdot(g[i - 1], w)) ** 2
    return rho[k - 1] * p * hw / (sum(rho[: k - 1]) * p * hw + alpha * p * gw + s2)


def lp_vertex_min(c, A, b):
    """min c^T x s.t. A x <= b by enumerating vertices (small dense problems)."""
    m, n = A.shape
    best = math.inf
    for rows in itertools.combinations(range(m), n):
        Ar = A[list(rows)]
        if abs(np.linalg.det(Ar)) < 1e-12:
            continue
        x = np.linalg.solve(Ar, b[list(rows)])
        if np.all(A @ x <= b + 1e-9):
            best = min(best, float(c @ x))
    return best


def brute_force_min_power(h, g, f, q, s2, alpha, eta, p_b, xi, targets, p_max,
                          n_theta=100, n_phi=100, rho_step=1e-3):
    """Minimum transmit power for M = 2, K = 2 by exhaustive search.

    Directions w = (cos t, sin t e^{j phi}) cover the unit sphere of C^2 up
    to a common phase.  For each direction and each rho_1 on the grid the
    least power meeting every constraint follows from the SINR form
    p N / (p I + s2) >= gamma, i.e. p >= gamma s2 / (N - gamma I).
    ``targets`` is (gamma_0, gamma_1, gamma_2) with the tag on gamma_0'/2.
    """
    theta = (np.arange(n_theta) + 0.5) * (np.pi / 2) / n_theta
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.stack([np.cos(T).ravel(), (np.sin(T) * np.exp(1j * P)).ravel()], axis=1)  # (N, 2)
    hw = np.abs(W @ h.conj().T) ** 2           # |h_k^H w|^2, (N, 2)
    gw = np.abs(W @ g.conj().T) ** 2
    fw = np.abs(W @ f.conj()) ** 2
    order_ok = hw[:, 0] >= hw[:, 1]
    rho1 = np.arange(rho_step, 0.5 + 1e-12, rho_step)
    rho2 = 1.0 - rho1
    best = math.inf
    g0, g1, g2 = targets
    for r1, r2 in zip(rho1, rho2):
        need = np.zeros(W.shape[0])
        feas = order_ok.copy()

        def req(num, interf, gamma):
            nonlocal need, feas
            if gamma <= 0:
                return
            margin = num - gamma * interf
            ok = margin > 0
            feas &= ok
            need = np.where(ok, np.maximum(need, gamma * s2 / np.where(ok, margin, 1.0)), need)

        # U_1 decoding its own signal: residual of U_2 after SIC
        req(r1 * hw[:, 0], r2 * (2 - 2 * xi[1]) * hw[:, 0] + alpha * gw[:, 0], g1)
        # U_2's signal at U_1 and at U_2
        req(r2 * hw[:, 0], r1 * hw[:, 0] + alpha * gw[:, 0], g2)
        req(r2 * hw[:, 1], r1 * hw[:, 1] + alpha * gw[:, 1], g2)
        # tag at U_1: alpha |g_1^H w|^2 p / (2 (D |h_1^H w|^2 p + s2)) >= g0
        D = r1 * (2 - 2 * xi[0]) + r2 * (2 - 2 * xi[1])
        req(alpha * gw[:, 0], D * hw[:, 0], 2 * g0)
        if p_b > 0:
            eh = eta * (1 - alpha) * fw
            need = np.maximum(need, p_b / np.where(eh > 0, eh, 1e-300))
        feas &= need <= p_max
        if np.any(feas):
            best = min(best, float(need[feas].min()))
    return best
