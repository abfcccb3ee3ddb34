"""Transmit-power minimization by alternating SDR and power-split steps.

For a fixed split rho every constraint is linear in ``W = p_t w w^H``::

    minimize Tr(W)  s.t.  Tr(A_j W) >= b_j,  W PSD

The SDR is solved in its dual form (a handful of multipliers and one
2M x 2M real LMI), which is far cheaper than lifting the M^2 entries of W
into the interior-point iterations.  ``W`` itself is read back from the
multiplier of the LMI.
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from . import conic
from .allocation import RHO_MIN, max_slack_split, sinr_rows
from .channel import make_rng
from .model import (
    Beamformer,
    PowerAllocation,
    constraint_violations,
    interference_coeffs,
    noma_order_satisfied,
    tag_residual_coeff,
)

RANK_ONE_RATIO = 1e-6
DEFAULT_RANDOMIZATIONS = 100
EPSILON = 1e-3
MAX_OUTER = 50
RECHECK_TOL = 1e-6


class TpStatus(str, Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


class RandomizationFailed(RuntimeError):
    pass


@dataclass
class LinearConstraint:
    label: str
    A: np.ndarray      # Hermitian M x M
    b: float
    kind: str          # "rate", "tag", "eh", "order", "cap"


@dataclass
class SdrProblem:
    program: conic.ConeProgram
    constraints: list
    p_ref: float
    rho: np.ndarray
    infeasible_reason: str = ""

    def recover(self, sol):
        """Hermitian W (watts) from the solution of the dual-form program."""
        Z = sol.psd_dual("lmi")
        return 2.0 * self.p_ref * conic.hermitian_unembed(Z)

    def lower_bound(self, sol):
        return -sol.objective * self.p_ref


@dataclass
class SdrStepResult:
    W: np.ndarray
    rank_one: bool
    p_t: float
    w: Beamformer
    sdr_lower_bound: float
    randomization_trials_used: int
    singular_ratio: float
    rho: np.ndarray = None


@dataclass
class TpTrace:
    iteration: int
    p_t: float
    step: str
    rank_one: bool
    randomizations: int
    accepted: bool


@dataclass
class TpResult:
    status: TpStatus
    w: Beamformer = None
    alloc: PowerAllocation = None
    p_t: float = math.inf
    sdr_steps: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    outer_iterations: int = 0
    rejected_steps: int = 0
    diagnostics: str = ""

    @property
    def p_trace(self):
        return [t.p_t for t in self.trace if t.accepted]


def _outer(x):
    return np.outer(x, x.conj())


def sdr_constraints(params, channels, rho):
    """Constraint list of the lifted problem for split ``rho`` (all in watts)."""
    rho = np.asarray(rho, dtype=float)
    K, M = params.num_users, params.num_antennas
    alpha = params.reflection_coeff
    s2 = params.noise_power
    targets = params.sinr_thresholds
    c = interference_coeffs(rho, params.sic_quality)
    H = [_outer(channels.h[i]) for i in range(K)]
    G = [_outer(channels.g[i]) for i in range(K)]
    out = []
    for k in range(K):
        g = targets[k + 1]
        if g <= 0:
            continue
        for i in range(k + 1):
            A = rho[k] * H[i] - g * (c[k] * H[i] + alpha * G[i])
            out.append(LinearConstraint(f"rate_u{k + 1}@u{i + 1}", A, g * s2, "rate"))
    g0 = targets[0]
    if g0 > 0:
        D = tag_residual_coeff(rho, params.sic_quality)
        out.append(LinearConstraint("tag_rate", alpha * G[0] - 2.0 * g0 * D * H[0], 2.0 * g0 * s2, "tag"))
    if params.eh_threshold > 0:
        F = params.eh_efficiency * (1.0 - alpha) * _outer(channels.f)
        out.append(LinearConstraint("energy_harvesting", F, params.eh_threshold, "eh"))
    for k in range(K - 1):
        out.append(LinearConstraint(f"order_{k + 1}", H[k] - H[k + 1], 0.0, "order"))
    out.append(LinearConstraint("max_power", -np.eye(M), -params.max_power, "cap"))
    return out


def build_sdr(params, channels, rho):
    """Dual-form cone program of the relaxed power-minimization problem."""
    cons = sdr_constraints(params, channels, rho)
    M = params.num_antennas
    p_ref, reason = 0.0, ""
    for con in cons:
        if con.b > 0:
            lam = float(np.linalg.eigvalsh(con.A)[-1])
            if lam <= 0:
                reason = f"{con.label} cannot be met by any beamformer"
                p_ref = max(p_ref, 1.0)
                continue
            p_ref = max(p_ref, con.b / lam)
    if p_ref == 0.0:
        p_ref = params.max_power
    m = len(cons)
    scales = np.array([max(np.max(np.abs(np.linalg.eigvalsh(con.A))), 1e-300) for con in cons])
    bvec = np.array([con.b for con in cons]) / (scales * p_ref)
    bld = conic.ProgramBuilder(m)
    bld.minimize(-bvec)
    bld.nonneg(np.eye(m), np.zeros(m), name="mult")
    cols = [-conic.svec_colmajor(conic.hermitian_embed(con.A / s, tol=1e-8)) for con, s in zip(cons, scales)]
    bld.psd(np.column_stack(cols), conic.svec_colmajor(np.eye(2 * M)), name="lmi")
    return SdrProblem(bld.build(), cons, p_ref, np.asarray(rho, dtype=float), reason)


def min_power_along(constraints, u, order_tol=1e-12):
    """Smallest p with sqrt(p) u feasible; inf if no scaling works."""
    p = 0.0
    scale = max(float(np.vdot(u, u).real), 1e-300)
    for con in constraints:
        val = float(np.vdot(u, con.A @ u).real)
        if con.kind == "order":
            if val < -order_tol * float(np.max(np.abs(np.diag(con.A)))) * scale:
                return math.inf
            continue
        if con.kind == "cap":
            continue
        if con.b <= 0:
            continue
        if val <= 0:
            return math.inf
        p = max(p, con.b / val)
    return p


def extract_precoder(problem, W, lower_bound, params=None, channels=None,
                     rng=None, num_randomizations=DEFAULT_RANDOMIZATIONS):
    """Rank-one extraction, falling back to Gaussian randomization.

    Every candidate direction is scaled to the least power meeting all
    lower-bound constraints, so candidates compare on transmit power.
    """
    W = 0.5 * (W + W.conj().T)
    evals, U = np.linalg.eigh(W)
    evals, U = evals[::-1], U[:, ::-1]
    evals = np.clip(evals, 0.0, None)
    ratio = evals[1] / evals[0] if evals.size > 1 and evals[0] > 0 else 0.0
    cons = problem.constraints
    p_max = next(c.b for c in cons if c.kind == "cap") * -1.0

    def feasible(u, p):
        if not (p <= p_max * (1 + 1e-9)) or not math.isfinite(p):
            return False
        if params is None:
            return True
        w = u / np.linalg.norm(u)
        if not noma_order_satisfied(channels, w):
            return False
        alloc = PowerAllocation(problem.rho, p)
        return not constraint_violations(params, channels, w, alloc, RECHECK_TOL)

    u1 = U[:, 0]
    if ratio <= RANK_ONE_RATIO:
        p = max(float(evals.sum()), min_power_along(cons, u1 / np.linalg.norm(u1)))
        if feasible(u1, p):
            return SdrStepResult(W, True, p, Beamformer.from_direction(u1), lower_bound, 0, ratio,
                                 problem.rho)

    rng = rng if rng is not None else make_rng(0)
    best_p, best_u, used = math.inf, None, 0
    root = U * np.sqrt(evals)[None, :]
    cands = [u1]
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(num_randomizations, evals.size))
    cands.extend(root @ np.exp(1j * ph) for ph in phases)
    for j, v in enumerate(cands):
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        u = v / nv
        p = min_power_along(cons, u)
        if p < best_p and feasible(u, p):
            best_p, best_u, used = p, u, j
    if best_u is None:
        raise RandomizationFailed(f"no feasible candidate among {len(cands)} draws")
    return SdrStepResult(W, False, best_p, Beamformer.from_direction(best_u), lower_bound,
                         len(cands) - 1, ratio, problem.rho)


def sdr_step(params, channels, rho, rng=None, num_randomizations=DEFAULT_RANDOMIZATIONS):
    """Solve the relaxation for fixed ``rho`` and extract a precoder.

    Returns ``(SdrStepResult | None, reason)``.
    """
    prob = build_sdr(params, channels, rho)
    if prob.infeasible_reason:
        return None, prob.infeasible_reason
    sol = conic.solve(prob.program, tol=1e-9)
    if sol.status is conic.Status.UNBOUNDED:
        return None, "relaxation infeasible"
    if not sol.usable(1e-6):
        return None, f"solver: {sol.status.value}"
    W = prob.recover(sol)
    try:
        res = extract_precoder(prob, W, prob.lower_bound(sol), params, channels, rng, num_randomizations)
    except RandomizationFailed as exc:
        return None, str(exc)
    return res, ""


def power_allocation_step(params, channels, w, p_t, rho_prev=None):
    """Best split for a fixed beam direction.

    With ``w`` fixed, requiring every SINR target at power ``p`` reads
    ``R rho - gamma b >= gamma / p`` row by row, so maximizing ``t = 1/p``
    is a max-slack LP.  Returns ``(rho, p_new)`` or ``(None, inf)``.
    """
    K = params.num_users
    w = getattr(w, "w", w)
    s2 = params.noise_power
    a = np.abs(channels.h.conj() @ w) ** 2 / s2
    b = params.reflection_coeff * np.abs(channels.q) ** 2 * abs(np.vdot(channels.f, w)) ** 2 / s2
    targets = params.sinr_thresholds
    R, r_int, _ = sinr_rows(params, a, b, targets, noise=0.0)
    _, r_full, _ = sinr_rows(params, a, b, targets, noise=1.0)
    wts = r_int - r_full        # gamma per user row, 2 gamma_0 for the tag row
    t_ref = 1.0 / p_t
    cap = 1e6
    if params.eh_threshold > 0:
        eh = params.eh_efficiency * (1 - params.reflection_coeff) * abs(np.vdot(channels.f, w)) ** 2
        cap = min(cap, eh / params.eh_threshold / t_ref)
    if R.size == 0:
        rho = np.asarray(rho_prev if rho_prev is not None else np.full(K, 1.0 / K))
        tau = cap
    else:
        rho, tau = max_slack_split(R, r_int, K, weights=wts * t_ref, cap=cap, tol=1e-10)
        if rho is None:
            return None, math.inf
    p_new = max(p_t / tau, 1.0 / (cap * t_ref)) if tau > 0 else math.inf
    return rho, p_new


def initial_splits(params):
    """Ladder of candidate splits, best interference-limited margin first."""
    K = params.num_users
    if K == 1:
        return [np.ones(1)]
    targets = params.sinr_thresholds.copy()
    targets[0] = 0.0
    R, r0, _ = sinr_rows(params, np.ones(K), np.zeros(K), targets, noise=0.0)
    out = []
    if R.size:
        rho, tau = max_slack_split(R, r0, K)
        if rho is not None and tau > 0:
            out.append(rho)
    else:
        out.append(np.full(K, 1.0 / K))
    for ratio in (2.0, 4.0, 8.0, 16.0, 32.0, 1.5):
        rho = ratio ** np.arange(K)
        rho = rho / rho.sum()
        if R.size == 0 or np.all(R @ rho + r0 > 0):
            out.append(rho)
    return out


def solve_tpmin(params, channels, rho_init=None, seed=0, epsilon=EPSILON, max_outer=MAX_OUTER,
                num_randomizations=DEFAULT_RANDOMIZATIONS):
    rng = make_rng(seed)
    res = TpResult(TpStatus.INFEASIBLE)
    ladder = [np.asarray(rho_init, dtype=float)] if rho_init is not None else initial_splits(params)
    if not ladder:
        res.diagnostics = "rate targets unreachable at any power (interference-limited)"
        return res
    step, reasons = None, []
    for rho in ladder:
        step, why = sdr_step(params, channels, rho, rng, num_randomizations)
        if step is not None:
            break
        reasons.append(why)
    if step is None:
        res.diagnostics = "; ".join(dict.fromkeys(reasons))
        return res

    w, p = step.w, step.p_t
    rho = np.asarray(rho, dtype=float)
    res.sdr_steps.append(step)
    res.trace.append(TpTrace(0, p, "sdr", step.rank_one, step.randomization_trials_used, True))
    status = TpStatus.MAX_ITER
    for it in range(1, max_outer + 1):
        p_start = p
        new_rho, p_rho = power_allocation_step(params, channels, w, p, rho)
        ok = bool(new_rho is not None and p_rho <= p)
        if ok:
            alloc = PowerAllocation(new_rho, p_rho)
            ok = not constraint_violations(params, channels, w, alloc, RECHECK_TOL)
        if ok:
            rho, p = new_rho, p_rho
        else:
            res.rejected_steps += 1
        res.trace.append(TpTrace(it, p, "split", False, 0, ok))

        cand, _ = sdr_step(params, channels, rho, rng, num_randomizations)
        ok = bool(cand is not None and cand.p_t <= p)
        if cand is not None:
            res.sdr_steps.append(cand)
        if ok:
            w, p = cand.w, cand.p_t
        else:
            res.rejected_steps += 1
        res.trace.append(TpTrace(it, p, "sdr", bool(cand and cand.rank_one),
                                 cand.randomization_trials_used if cand else 0, ok))
        res.outer_iterations = it
        if (p_start - p) / p_start < epsilon:
            status = TpStatus.CONVERGED
            break
    alloc = PowerAllocation(rho, p)
    viol = constraint_violations(params, channels, w, alloc, RECHECK_TOL)
    if viol:
        res.diagnostics = f"final recheck failed: {viol}"
        res.status = TpStatus.INFEASIBLE
    else:
        res.status = status
    res.w, res.alloc, res.p_t = w, alloc, p
    return res
