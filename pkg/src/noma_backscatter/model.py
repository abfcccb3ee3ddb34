"""System model: domain types, SINRs, rates and harvested power.

Conventions
-----------
* Users are numbered ``1..K`` in the public API.  Every length ``K+1``
  vector (weights, rate thresholds, per-device rates) keeps the tag at
  index 0, so user ``k`` sits at index ``k``.
* All powers are in watts.
* ``K_k = {1..k-1}`` are the stronger users whose (low-power) signals
  ``U_k`` treats as interference; ``K_k' = {k+1..K}`` are the weaker users
  whose signals are removed by imperfect SIC, leaving a residual
  ``rho_j (2 - 2 xi_j)``.
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from .special import e1_scaled

LOG2E = 1.0 / math.log(2.0)


class InvalidInput(ValueError):
    """Raised when inputs violate a documented precondition."""


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SystemParams:
    num_antennas: int
    num_users: int
    reflection_coeff: float
    eh_efficiency: float
    eh_threshold: float
    noise_power: float
    sic_quality: np.ndarray
    weights: np.ndarray
    rate_thresholds: np.ndarray
    max_power: float = 1.0

    def __post_init__(self):
        K = int(self.num_users)
        if K < 1 or int(self.num_antennas) < 1:
            raise InvalidInput("num_users and num_antennas must be positive")
        object.__setattr__(self, "num_users", K)
        object.__setattr__(self, "num_antennas", int(self.num_antennas))
        xi = np.broadcast_to(np.asarray(self.sic_quality, dtype=float), (K,))
        object.__setattr__(self, "sic_quality", _frozen(xi))
        a = _frozen(self.weights)
        r = _frozen(self.rate_thresholds)
        if a.shape != (K + 1,) or r.shape != (K + 1,):
            raise InvalidInput(f"weights and rate_thresholds need length K+1={K + 1}")
        if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
            raise InvalidInput("weights must be nonnegative and sum to 1")
        if np.any(r < 0):
            raise InvalidInput("rate thresholds must be nonnegative")
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "rate_thresholds", r)
        if not 0.0 < self.reflection_coeff < 1.0:
            raise InvalidInput("reflection_coeff must lie in (0, 1)")
        if not 0.0 < self.eh_efficiency <= 1.0:
            raise InvalidInput("eh_efficiency must lie in (0, 1]")
        if np.any(xi < 0) or np.any(xi > 1):
            raise InvalidInput("sic_quality entries must lie in [0, 1]")
        if self.eh_threshold < 0 or not self.noise_power > 0 or not self.max_power > 0:
            raise InvalidInput("need eh_threshold >= 0, noise_power > 0, max_power > 0")

    @property
    def sinr_thresholds(self):
        """SINR targets ``2^R - 1``; index 0 is the tag's target on gamma_0 = gamma_0'/2."""
        return np.exp2(self.rate_thresholds) - 1.0

    def replace(self, **changes):
        fields = {name: getattr(self, name) for name in self.__dataclass_fields__}
        fields.update(changes)
        return SystemParams(**fields)


@dataclass(frozen=True)
class ChannelSet:
    """One channel realization.  ``h`` is K x M, ``f`` has length M, ``q`` length K."""

    h: np.ndarray
    f: np.ndarray
    q: np.ndarray
    g: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        f = np.asarray(self.f, dtype=complex).ravel()
        q = np.asarray(self.q, dtype=complex).ravel()
        if h.shape[1] != f.size or h.shape[0] != q.size:
            raise InvalidInput(f"inconsistent channel shapes h{h.shape} f{f.shape} q{q.shape}")
        object.__setattr__(self, "h", _frozen(h, complex))
        object.__setattr__(self, "f", _frozen(f, complex))
        object.__setattr__(self, "q", _frozen(q, complex))
        object.__setattr__(self, "g", _frozen(q[:, None] * f[None, :], complex))

    @property
    def num_users(self):
        return self.h.shape[0]

    @property
    def num_antennas(self):
        return self.h.shape[1]

    def permuted(self, order):
        """Relabel users: new user ``k`` is old user ``order[k-1]`` (0-based entries)."""
        order = np.asarray(order)
        return ChannelSet(self.h[order], self.f, self.q[order])


class BeamMode(str, Enum):
    DIGITAL = "digital"
    CONSTANT_MODULUS = "constant_modulus"


@dataclass(frozen=True)
class Beamformer:
    w: np.ndarray
    mode: BeamMode = BeamMode.DIGITAL

    def __post_init__(self):
        w = _frozen(np.asarray(self.w, dtype=complex).ravel(), complex)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "mode", BeamMode(self.mode))
        if self.mode is BeamMode.DIGITAL:
            if abs(np.vdot(w, w).real - 1.0) > 1e-9:
                raise InvalidInput("digital beamformer must have unit norm")
        elif np.max(np.abs(np.abs(w) - 1.0 / math.sqrt(w.size))) > 1e-9:
            raise InvalidInput("constant-modulus beamformer needs |w_m| = 1/sqrt(M)")

    @classmethod
    def from_direction(cls, v, mode=BeamMode.DIGITAL):
        v = np.asarray(v, dtype=complex).ravel()
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InvalidInput("zero beamforming direction")
        if BeamMode(mode) is BeamMode.CONSTANT_MODULUS:
            return project_constant_modulus(v)
        return cls(v / norm, BeamMode.DIGITAL)


def project_constant_modulus(w):
    """Keep the phases of ``w`` and set every modulus to 1/sqrt(M)."""
    w = np.asarray(getattr(w, "w", w), dtype=complex).ravel()
    if not np.any(w):
        raise InvalidInput("cannot project a zero vector")
    phase = np.where(np.abs(w) > 0, np.angle(w), 0.0)
    return Beamformer(np.exp(1j * phase) / math.sqrt(w.size), BeamMode.CONSTANT_MODULUS)


@dataclass(frozen=True)
class PowerAllocation:
    rho: np.ndarray
    p_t: float

    def __post_init__(self):
        rho = _frozen(np.atleast_1d(np.asarray(self.rho, dtype=float)))
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "p_t", float(self.p_t))
        if abs(rho.sum() - 1.0) > 1e-9:
            raise InvalidInput(f"power split must sum to 1, got {rho.sum()!r}")
        if np.any(np.diff(rho) < -1e-9):
            raise InvalidInput("power split must be nondecreasing (rho_1 <= ... <= rho_K)")
        if np.any(rho < 0) or self.p_t < 0:
            raise InvalidInput("negative power")


@dataclass(frozen=True)
class RateReport:
    user_sinr: np.ndarray
    user_rates: np.ndarray
    tag_avg_sinr: float
    tag_rate_exact: float
    tag_rate_lb: float
    harvested_power: float
    wsr: float
    wsr_exact: float

    def rates(self, exact_tag=False):
        """Length K+1 rate vector, tag first."""
        r0 = self.tag_rate_exact if exact_tag else self.tag_rate_lb
        return np.concatenate([[r0], self.user_rates])


# ----------------------------------------------------------------------------
# building blocks


def _vec(w):
    return np.asarray(getattr(w, "w", w), dtype=complex).ravel()


def _check(params, channels, w, alloc=None):
    w = _vec(w)
    if channels.num_users != params.num_users or channels.num_antennas != params.num_antennas:
        raise InvalidInput("channel dimensions do not match the system parameters")
    if w.size != params.num_antennas:
        raise InvalidInput(f"beamformer has {w.size} entries, expected {params.num_antennas}")
    if alloc is not None and alloc.rho.size != params.num_users:
        raise InvalidInput("power split length differs from the number of users")
    return w


def direct_gains(channels, w):
    """|h_k^H w|^2 for every user."""
    return np.abs(channels.h.conj() @ _vec(w)) ** 2


def forward_gain(channels, w):
    """|f^H w|^2, the beamforming gain towards the tag."""
    return abs(np.vdot(channels.f, _vec(w))) ** 2


def interference_coeffs(rho, xi):
    """c_k = sum_{j<k} rho_j + sum_{j>k} rho_j (2 - 2 xi_j), one entry per user."""
    rho = np.asarray(rho, dtype=float)
    resid = rho * (2.0 - 2.0 * np.asarray(xi, dtype=float))
    before = np.concatenate([[0.0], np.cumsum(rho)[:-1]])
    after = np.concatenate([np.cumsum(resid[::-1])[::-1][1:], [0.0]])
    return before + after


def tag_residual_coeff(rho, xi):
    """sum_j rho_j (2 - 2 xi_j): SIC residual seen by U_1 when decoding the tag."""
    return float(np.sum(np.asarray(rho) * (2.0 - 2.0 * np.asarray(xi))))


def _pair_terms(params, channels, w, alloc):
    """Numerators and denominators of gamma_i^k as K x K arrays (row i, column k)."""
    a = direct_gains(channels, w) * alloc.p_t
    b = params.reflection_coeff * alloc.p_t * np.abs(channels.q) ** 2 * forward_gain(channels, w)
    c = interference_coeffs(alloc.rho, params.sic_quality)
    num = a[:, None] * alloc.rho[None, :]
    den = a[:, None] * c[None, :] + b[:, None] + params.noise_power
    return num, den


def user_sinr_cross(params, channels, w, alloc, i, k):
    """SINR of U_k's signal when decoded at U_i (1-based, i <= k)."""
    w = _check(params, channels, w, alloc)
    K = params.num_users
    if not 1 <= i <= k <= K:
        raise InvalidInput(f"need 1 <= i <= k <= K, got i={i}, k={k}")
    num, den = _pair_terms(params, channels, w, alloc)
    return float(num[i - 1, k - 1] / den[i - 1, k - 1])


def sinr_matrix(params, channels, w, alloc):
    """K x K matrix of gamma_i^k; entries with i > k are NaN."""
    w = _check(params, channels, w, alloc)
    num, den = _pair_terms(params, channels, w, alloc)
    out = num / den
    out[np.tril_indices(params.num_users, -1)] = np.nan
    return out


def user_sinrs(params, channels, w, alloc):
    """Effective SINR gamma_k = min_{i <= k} gamma_i^k for every user."""
    return np.nanmin(sinr_matrix(params, channels, w, alloc), axis=0)


def binding_decoders(params, channels, w, alloc):
    """Index (1-based) of the decoder attaining the min for each user; ties -> lowest index."""
    mat = sinr_matrix(params, channels, w, alloc)
    mat = np.where(np.isnan(mat), np.inf, mat)
    return np.argmin(mat, axis=0) + 1


def user_effective_sinr(params, channels, w, alloc, k):
    return float(user_sinrs(params, channels, w, alloc)[k - 1])


def rate_from_sinr(sinr):
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0) or np.any(np.isnan(sinr)):
        raise InvalidInput("SINR must be nonnegative")
    out = np.log2(1.0 + sinr)
    return float(out) if out.ndim == 0 else out


def user_rate(params, channels, w, alloc, k):
    return rate_from_sinr(user_effective_sinr(params, channels, w, alloc, k))


def tag_avg_sinr(params, channels, w, alloc):
    """Average backscatter SINR gamma_0' at U_1 after imperfect SIC."""
    w = _check(params, channels, w, alloc)
    fw = forward_gain(channels, w)
    h1 = direct_gains(channels, w)[0]
    resid = tag_residual_coeff(alloc.rho, params.sic_quality)
    num = params.reflection_coeff * alloc.p_t * abs(channels.q[0]) ** 2 * fw
    return float(num / (h1 * alloc.p_t * resid + params.noise_power))


def tag_rate_exact(avg_sinr):
    """Ergodic tag rate -exp(1/g) Ei(-1/g) log2(e) for average SINR g."""
    g = float(avg_sinr)
    if math.isnan(g) or g < 0:
        raise InvalidInput(f"average SINR must be >= 0, got {g}")
    if g == 0.0:
        return 0.0
    return e1_scaled(1.0 / g) * LOG2E


def tag_rate_lb(avg_sinr):
    """Lower bound log2(1 + g/2) on the ergodic tag rate."""
    g = float(avg_sinr)
    if math.isnan(g) or g < 0:
        raise InvalidInput(f"average SINR must be >= 0, got {g}")
    return math.log2(1.0 + 0.5 * g)


def harvested_power(params, channels, w, p_t):
    """Linear EH model: eta_b (1 - alpha) |f^H w|^2 p_t."""
    w = _check(params, channels, w)
    return params.eh_efficiency * (1.0 - params.reflection_coeff) * forward_gain(channels, w) * p_t


def noma_order_satisfied(channels, w, tol=1e-12):
    """True iff |h_1^H w|^2 >= ... >= |h_K^H w|^2 (relative tolerance ``tol``)."""
    gains = direct_gains(channels, w)
    if gains.size < 2:
        return True
    scale = max(float(gains.max()), np.finfo(float).tiny)
    return bool(np.all(np.diff(gains) <= tol * scale))


def rate_report(params, channels, w, alloc):
    sinr = user_sinrs(params, channels, w, alloc)
    rates = np.log2(1.0 + sinr)
    g0 = tag_avg_sinr(params, channels, w, alloc)
    r0 = tag_rate_exact(g0)
    r0lb = tag_rate_lb(g0)
    a = params.weights
    return RateReport(
        user_sinr=sinr,
        user_rates=rates,
        tag_avg_sinr=g0,
        tag_rate_exact=r0,
        tag_rate_lb=r0lb,
        harvested_power=harvested_power(params, channels, w, alloc.p_t),
        wsr=float(a[0] * r0lb + a[1:] @ rates),
        wsr_exact=float(a[0] * r0 + a[1:] @ rates),
    )


def weighted_sum_rate(params, channels, w, alloc, exact_tag=False):
    """sum_k a_k R_k; the tag term uses the lower bound unless ``exact_tag``."""
    rep = rate_report(params, channels, w, alloc)
    return rep.wsr_exact if exact_tag else rep.wsr


def device_sinrs(params, channels, w, alloc):
    """Length K+1 SINR vector on the optimizer's scale: tag gamma_0 = gamma_0'/2 first."""
    return np.concatenate([[0.5 * tag_avg_sinr(params, channels, w, alloc)],
                           user_sinrs(params, channels, w, alloc)])


def constraint_violations(params, channels, w, alloc, tol=1e-6, mode=None):
    """Check every constraint of the design problems directly on the model.

    Returns a dict ``name -> relative violation`` holding only the
    constraints that fail at relative tolerance ``tol``.  An empty dict
    means the point is feasible.
    """
    w = _check(params, channels, w, alloc)
    out = {}
    targets = params.sinr_thresholds
    got = device_sinrs(params, channels, w, alloc)
    for k in range(params.num_users + 1):
        if targets[k] > 0 and got[k] < targets[k] * (1.0 - tol):
            name = "tag_rate" if k == 0 else f"rate_u{k}"
            out[name] = (targets[k] - got[k]) / targets[k]
    if params.eh_threshold > 0:
        ph = harvested_power(params, channels, w, alloc.p_t)
        if ph < params.eh_threshold * (1.0 - tol):
            out["energy_harvesting"] = (params.eh_threshold - ph) / params.eh_threshold
    rho = alloc.rho
    if abs(rho.sum() - 1.0) > tol:
        out["power_split_sum"] = abs(rho.sum() - 1.0)
    if np.any(np.diff(rho) < -tol):
        out["power_split_order"] = float(-np.diff(rho).min())
    if not noma_order_satisfied(channels, w, tol):
        gains = direct_gains(channels, w)
        out["noma_order"] = float(np.diff(gains).max() / gains.max())
    mode = BeamMode(mode) if mode is not None else None
    if mode is BeamMode.CONSTANT_MODULUS:
        dev = np.max(np.abs(np.abs(w) - 1.0 / math.sqrt(w.size))) * math.sqrt(w.size)
        if dev > tol:
            out["constant_modulus"] = float(dev)
    elif abs(np.linalg.norm(w) - 1.0) > tol:
        out["unit_norm"] = abs(np.linalg.norm(w) - 1.0)
    if alloc.p_t > params.max_power * (1.0 + tol):
        out["max_power"] = (alloc.p_t - params.max_power) / params.max_power
    return out
