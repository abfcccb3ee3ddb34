"""Weighted-sum-rate maximization by alternating beamformer and power-split blocks.

Each block maximizes the Lagrangian-dual-transform surrogate

    sum_k a_k log(1 + beta_k) - a_k beta_k + a_k (1 + beta_k) A_k / (A_k + B_k)

with ``beta`` at the current SINRs.  The ratio ``A/(A+B)`` is replaced by
its quadratic-transform minorizer ``2 Re(y^* sqrt(A)) - |y|^2 (A + B)``,
which is tight at the incumbent, so every accepted step can only raise the
true objective.  Users decoded at several receivers take the smallest of
the per-receiver minorizers.  Threshold, energy and ordering constraints
enter as convex inner approximations around the incumbent.
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from . import conic
from .allocation import RHO_MIN, max_slack_split, normalized_gains, sinr_rows
from .baselines import candidate_directions
from .model import (
    Beamformer,
    BeamMode,
    PowerAllocation,
    constraint_violations,
    device_sinrs,
    interference_coeffs,
    noma_order_satisfied,
    project_constant_modulus,
    rate_report,
    tag_residual_coeff,
)

EPSILON = 1e-3
MAX_OUTER = 50
INNER_MAX = 5
INNER_TOL = 1e-4
RECHECK_TOL = 1e-6
ASCENT_SLACK = 1e-9


class WsrStatus(str, Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"
    CONSTRAINT_VIOLATION = "ConstraintViolation"


@dataclass
class WsrIterate:
    w: Beamformer
    alloc: PowerAllocation
    beta: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    y: np.ndarray
    objective_trace: list = field(default_factory=list)


@dataclass
class TraceRecord:
    iteration: int
    block: str
    wsr: float
    sinrs: np.ndarray
    accepted: bool
    note: str = ""


@dataclass
class WsrResult:
    status: WsrStatus
    w: Beamformer = None
    alloc: PowerAllocation = None
    wsr: float = math.nan
    wsr_exact: float = math.nan
    rates: np.ndarray = None
    rates_exact: np.ndarray = None
    harvested_power: float = math.nan
    outer_iterations: int = 0
    rejected_steps: int = 0
    trace: list = field(default_factory=list)
    iterate: WsrIterate = None
    violations: dict = field(default_factory=dict)
    diagnostics: str = ""

    @property
    def objective_trace(self):
        return [t.wsr for t in self.trace if t.accepted]


# ----------------------------------------------------------------------------
# closed-form auxiliary updates


def _weights(params):
    return params.weights


def update_beta(params, channels, w, alloc):
    """Current SINRs: tag gamma_0 = gamma_0'/2 first, then users."""
    return device_sinrs(params, channels, w, alloc)


def update_lambda(params, channels, w, alloc):
    """lambda_k = a_k B_k / (A_k + B_k) = a_k / (1 + gamma_k)."""
    return _weights(params) / (1.0 + update_beta(params, channels, w, alloc))


update_theta = update_beta
update_y = update_lambda


def lagrangian(params, beta, lam, gamma):
    """L(beta, lambda) with natural logarithms."""
    a = _weights(params)
    beta = np.asarray(beta, dtype=float)
    return float(np.sum(a * np.log1p(beta)) - np.sum(np.asarray(lam) * (beta - np.asarray(gamma))))


def wsr_value(params, channels, w, alloc):
    return rate_report(params, channels, w, alloc).wsr


def is_feasible(params, channels, w, alloc, mode=None):
    return not constraint_violations(params, channels, w, alloc, RECHECK_TOL, mode)


# ----------------------------------------------------------------------------
# beamformer block


def _cplx_rows(v):
    """2 x 2M real map giving (Re, Im) of v^H w for w = wr + j wi."""
    v = np.asarray(v, dtype=complex)
    return np.vstack([np.concatenate([v.real, v.imag]), np.concatenate([-v.imag, v.real])])


def _rotated(bld, t_row, t_const, Z, name=None):
    """||Z x||^2 <= t_row @ x + t_const as a second-order cone."""
    # (t + 1) >= ||(2 z, t - 1)||
    F = np.vstack([t_row, 2.0 * Z, t_row])
    f = np.concatenate([[t_const + 1.0], np.zeros(Z.shape[0]), [t_const - 1.0]])
    return bld.soc(F, f, name=name)


def beamformer_step(params, channels, rho, beta, w_prev, p_t):
    """One minorize-maximize step over w with rho fixed.

    Returns ``(w or None, note)``; ``w`` is unit norm.
    """
    K, M = params.num_users, params.num_antennas
    rho = np.asarray(rho, dtype=float)
    w0 = np.asarray(getattr(w_prev, "w", w_prev), dtype=complex)
    s = math.sqrt(params.noise_power)
    hh = channels.h * math.sqrt(p_t) / s
    gh = channels.g * math.sqrt(params.reflection_coeff * p_t) / s
    c = interference_coeffs(rho, params.sic_quality)
    D = tag_residual_coeff(rho, params.sic_quality)
    a = params.weights
    targets = params.sinr_thresholds
    beta = np.asarray(beta, dtype=float)
    active = [k for k in range(K + 1) if a[k] > 0]
    nw = 2 * M
    n = nw + len(active)
    sidx = {k: nw + j for j, k in enumerate(active)}
    bld = conic.ProgramBuilder(n)
    obj = np.zeros(n)
    for k in active:
        obj[sidx[k]] = -a[k] * (1.0 + beta[k])
    bld.minimize(obj)

    def pad(rows):
        rows = np.atleast_2d(rows)
        return np.hstack([rows, np.zeros((rows.shape[0], n - nw))])

    for k in active:
        if k == 0:
            u = gh[0]
            B = np.vstack([_cplx_rows(gh[0]), math.sqrt(2.0 * D) * _cplx_rows(hh[0])])
            const = 2.0
            pairs = [(u, B, const)]
        else:
            pairs = []
            for i in range(k):
                u = math.sqrt(rho[k - 1]) * hh[i]
                B = np.vstack([math.sqrt(rho[k - 1] + c[k - 1]) * _cplx_rows(hh[i]), _cplx_rows(gh[i])])
                pairs.append((u, B, 1.0))
        for u, B, const in pairs:
            num = np.vdot(u, w0)
            zB = B @ np.concatenate([w0.real, w0.imag])
            den = float(zB @ zB) + const
            y = num / den
            ay = abs(y)
            # t = 2 Re(y^* u^H w) - |y|^2 const - s_k
            t_row = pad(2.0 * np.array([y.real, y.imag]) @ _cplx_rows(u))[0]
            t_row[sidx[k]] = -1.0
            _rotated(bld, t_row, -ay * ay * const, pad(ay * B))

    # rate thresholds as SOC inner approximations
    for k in range(1, K + 1):
        g = targets[k]
        if g <= 0:
            continue
        margin = rho[k - 1] - g * c[k - 1]
        if margin <= 0:
            return None, f"threshold of U{k} unreachable with this split"
        kappa = math.sqrt(margin / g)
        for i in range(k):
            phi = np.angle(np.vdot(hh[i], w0))
            lead = kappa * _cplx_rows(np.exp(1j * phi) * hh[i])[0]
            F = np.vstack([lead, _cplx_rows(gh[i]), np.zeros(nw)])
            bld.soc(pad(F), [0.0, 0.0, 0.0, 1.0])
    if targets[0] > 0:
        phi = np.angle(np.vdot(gh[0], w0))
        lead = _cplx_rows(np.exp(1j * phi) * gh[0])[0]
        r = math.sqrt(2.0 * targets[0])
        F = np.vstack([lead, r * math.sqrt(D) * _cplx_rows(hh[0]), np.zeros(nw)])
        bld.soc(pad(F), [0.0, 0.0, 0.0, r])

    # energy harvesting: first-order expansion of |f^H w|^2 around w0
    if params.eh_threshold > 0:
        need = params.eh_threshold / (params.eh_efficiency * (1 - params.reflection_coeff) * p_t)
        x0 = np.vdot(channels.f, w0)
        m0 = abs(x0) ** 2
        row = 2.0 * _cplx_rows(x0 * channels.f)[0] / m0
        bld.nonneg(pad(row), [-1.0 - need / m0])

    # NOMA ordering, each link scaled so the stronger gain is 1 at w0
    for k in range(K - 1):
        nk = abs(np.vdot(hh[k], w0))
        if nk == 0:
            return None, "degenerate ordering at incumbent"
        v, u = hh[k] / nk, hh[k + 1] / nk
        x0 = np.vdot(v, w0)
        t_row = pad(2.0 * _cplx_rows(x0 * v)[0])[0]
        _rotated(bld, t_row, -1.0, pad(_cplx_rows(u)))

    F = np.vstack([np.zeros(nw), np.eye(nw)])
    bld.soc(pad(F), np.concatenate([[1.0], np.zeros(nw)]))

    sol = conic.solve(bld.build(), tol=1e-9)
    if not sol.usable(1e-7):
        return None, f"solver: {sol.status.value}"
    w = sol.x[:M] + 1j * sol.x[M:nw]
    norm = np.linalg.norm(w)
    if norm < 1e-9:
        return None, "zero beamformer"
    return Beamformer(w / norm), ""


# ----------------------------------------------------------------------------
# power-split block


def power_step(params, channels, w, theta, rho_prev, p_t):
    """One minorize-maximize step over rho with w fixed.  Returns ``(rho or None, note)``."""
    K = params.num_users
    if K == 1:
        return np.ones(1), ""
    rho0 = np.asarray(rho_prev, dtype=float)
    a_n, b_n = normalized_gains(params, channels, w, p_t)
    resid = 2.0 - 2.0 * params.sic_quality
    c0 = interference_coeffs(rho0, params.sic_quality)
    D0 = tag_residual_coeff(rho0, params.sic_quality)
    a = params.weights
    theta = np.asarray(theta, dtype=float)
    active = [k for k in range(K + 1) if a[k] > 0]
    # variables: rho (K), u (K) with u_k <= sqrt(rho_k), s (one per active device)
    n = 2 * K + len(active)
    sidx = {k: 2 * K + j for j, k in enumerate(active)}
    bld = conic.ProgramBuilder(n)
    obj = np.zeros(n)
    for k in active:
        obj[sidx[k]] = -a[k] * (1.0 + theta[k])
    bld.minimize(obj)

    def c_row(k):
        # c_k(rho) as a row over rho (k is 0-based)
        row = np.zeros(K)
        row[:k] = 1.0
        row[k + 1:] = resid[k + 1:]
        return row

    rows, consts = [], []
    for k in active:
        if k == 0:
            den = b_n[0] + 2.0 * D0 * a_n[0] + 2.0
            y = math.sqrt(b_n[0]) / den
            row = np.zeros(n)
            row[:K] = y * y * 2.0 * a_n[0] * resid
            row[sidx[0]] = 1.0
            # s_0 <= 2 y sqrt(b) - y^2 (b + 2 D a + 2)
            rows.append(-row)
            consts.append(2.0 * y * math.sqrt(b_n[0]) - y * y * (b_n[0] + 2.0))
            continue
        kk = k - 1
        for i in range(k):
            den = (rho0[kk] + c0[kk]) * a_n[i] + b_n[i] + 1.0
            y = math.sqrt(rho0[kk] * a_n[i]) / den
            row = np.zeros(n)
            row[K + kk] = 2.0 * y * math.sqrt(a_n[i])
            row[:K] -= y * y * a_n[i] * c_row(kk)
            row[kk] -= y * y * a_n[i]
            row[sidx[k]] = -1.0
            rows.append(row)
            consts.append(-y * y * (b_n[i] + 1.0))
    bld.nonneg(np.array(rows), np.array(consts), name="surrogate")

    R, r0, _ = sinr_rows(params, a_n, b_n, params.sinr_thresholds)
    if R.size:
        scale = np.maximum(np.max(np.abs(R), axis=1), np.abs(r0))
        bld.nonneg(np.hstack([R / scale[:, None], np.zeros((R.shape[0], n - K))]), r0 / scale)
    F = np.zeros((K, n))
    f = np.zeros(K)
    F[0, 0], f[0] = 1.0, -RHO_MIN
    for k in range(1, K):
        F[k, k], F[k, k - 1] = 1.0, -1.0
    bld.nonneg(F, f)
    E = np.zeros((1, n))
    E[0, :K] = 1.0
    bld.equal(E, [1.0])
    for k in range(K):
        # u_k^2 <= rho_k  <=>  ||(2 u_k, rho_k - 1)|| <= rho_k + 1
        F = np.zeros((3, n))
        F[0, k] = 1.0
        F[1, K + k] = 2.0
        F[2, k] = 1.0
        bld.soc(F, [1.0, 0.0, -1.0])
    sol = conic.solve(bld.build(), tol=1e-9)
    if not sol.usable(1e-7):
        return None, f"solver: {sol.status.value}"
    rho = np.clip(sol.x[:K], 0.0, None)
    rho = np.maximum.accumulate(rho)
    return rho / rho.sum(), ""


# ----------------------------------------------------------------------------
# initialization and outer loop


def initialize(params, channels, p_t, seed=0):
    """Best-WSR feasible (w, rho) among deterministic and seeded candidate beams.

    If none of them is feasible, fall back to the power-minimization design
    capped at ``p_t``: its output stays feasible when raised to ``p_t``
    because every SINR and the harvested power grow with power along a
    fixed direction.
    """
    best = None
    for w in candidate_directions(channels, seed=seed):
        if not noma_order_satisfied(channels, w):
            continue
        a_n, b_n = normalized_gains(params, channels, w, p_t)
        R, r0, _ = sinr_rows(params, a_n, b_n, params.sinr_thresholds)
        if R.size:
            rho, tau = max_slack_split(R, r0, params.num_users)
            if rho is None or tau < 0:
                continue
        else:
            rho = _default_split(params.num_users)
        alloc = PowerAllocation(rho, p_t)
        if not is_feasible(params, channels, w, alloc):
            continue
        val = wsr_value(params, channels, w, alloc)
        if best is None or val > best[0]:
            best = (val, w, alloc)
    if best is not None:
        return best[1], best[2]
    from .tpmin import solve_tpmin

    tp = solve_tpmin(params.replace(max_power=p_t), channels, seed=seed)
    if tp.w is None:
        return None
    alloc = PowerAllocation(tp.alloc.rho, p_t)
    if not is_feasible(params, channels, tp.w, alloc):
        return None
    return tp.w, alloc


def _default_split(K):
    rho = np.arange(1, K + 1, dtype=float)
    return rho / rho.sum()


def _iterate(params, channels, w, alloc, trace_vals):
    beta = update_beta(params, channels, w, alloc)
    lam = update_lambda(params, channels, w, alloc)
    return WsrIterate(w, alloc, beta, lam, beta.copy(), lam.copy(), list(trace_vals))


def _w_block(params, channels, w, alloc, val, res, it):
    for _ in range(INNER_MAX):
        beta = update_beta(params, channels, w, alloc)
        new_w, note = beamformer_step(params, channels, alloc.rho, beta, w, alloc.p_t)
        ok = new_w is not None and is_feasible(params, channels, new_w, alloc)
        new_val = wsr_value(params, channels, new_w, alloc) if ok else -math.inf
        ok = ok and new_val >= val - ASCENT_SLACK
        rec_val = new_val if ok else val
        res.trace.append(TraceRecord(it, "w", rec_val, device_sinrs(params, channels, new_w if ok else w, alloc),
                                     ok, note))
        if not ok:
            res.rejected_steps += 1
            break
        gain = (new_val - val) / max(abs(val), 1e-12)
        w, val = new_w, max(new_val, val)
        if gain < INNER_TOL:
            break
    return w, val


def _rho_block(params, channels, w, alloc, val, res, it, mode=None):
    for _ in range(INNER_MAX):
        theta = update_theta(params, channels, w, alloc)
        rho, note = power_step(params, channels, w, theta, alloc.rho, alloc.p_t)
        ok = rho is not None
        if ok:
            new_alloc = PowerAllocation(rho, alloc.p_t)
            ok = is_feasible(params, channels, w, new_alloc, mode)
        new_val = wsr_value(params, channels, w, new_alloc) if ok else -math.inf
        ok = ok and new_val >= val - ASCENT_SLACK
        cur = new_alloc if ok else alloc
        res.trace.append(TraceRecord(it, "rho", new_val if ok else val, device_sinrs(params, channels, w, cur),
                                     ok, note))
        if not ok:
            res.rejected_steps += 1
            break
        gain = (new_val - val) / max(abs(val), 1e-12)
        alloc, val = new_alloc, max(new_val, val)
        if gain < INNER_TOL:
            break
    return alloc, val


def solve_wsrmax(params, channels, p_t, mode=BeamMode.DIGITAL, init=None, seed=0,
                 epsilon=EPSILON, max_outer=MAX_OUTER):
    """Alternate beamformer and split blocks until the relative gain drops below ``epsilon``."""
    mode = BeamMode(mode)
    res = WsrResult(WsrStatus.INFEASIBLE)
    if init is None:
        init = initialize(params, channels, p_t, seed)
        if init is None:
            res.diagnostics = "no feasible starting point among the candidate beams"
            return res
    w, alloc = init
    w = w if isinstance(w, Beamformer) else Beamformer.from_direction(w)
    alloc = alloc if isinstance(alloc, PowerAllocation) else PowerAllocation(alloc, p_t)
    if not is_feasible(params, channels, w, alloc):
        res.diagnostics = f"initial point infeasible: {constraint_violations(params, channels, w, alloc)}"
        return res
    val = wsr_value(params, channels, w, alloc)
    res.trace.append(TraceRecord(0, "init", val, device_sinrs(params, channels, w, alloc), True))
    status = WsrStatus.MAX_ITER
    for it in range(1, max_outer + 1):
        start = val
        w, val = _w_block(params, channels, w, alloc, val, res, it)
        alloc, val = _rho_block(params, channels, w, alloc, val, res, it)
        res.outer_iterations = it
        if (val - start) / max(abs(start), 1e-12) < epsilon:
            status = WsrStatus.CONVERGED
            break

    if mode is BeamMode.CONSTANT_MODULUS:
        w = project_constant_modulus(w)
        val = wsr_value(params, channels, w, alloc)
        res.trace.append(TraceRecord(res.outer_iterations, "project", val,
                                     device_sinrs(params, channels, w, alloc), True))
        if is_feasible(params, channels, w, alloc, mode):
            alloc, val = _rho_block(params, channels, w, alloc, val, res, res.outer_iterations + 1, mode)

    rep = rate_report(params, channels, w, alloc)
    res.w, res.alloc = w, alloc
    res.wsr, res.wsr_exact = rep.wsr, rep.wsr_exact
    res.rates, res.rates_exact = rep.rates(False), rep.rates(True)
    res.harvested_power = rep.harvested_power
    res.violations = constraint_violations(params, channels, w, alloc, RECHECK_TOL, mode)
    res.status = WsrStatus.CONSTRAINT_VIOLATION if res.violations else status
    res.iterate = _iterate(params, channels, w, alloc, res.objective_trace)
    return res
