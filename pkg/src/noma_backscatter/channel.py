"""Channel realizations: UMi path loss, Rayleigh fading, thermal noise."""

from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, InvalidInput
from .units import dbm_to_watts


@dataclass(frozen=True)
class Geometry:
    d_h: tuple          # BS -> U_k, meters
    d_f: float          # BS -> tag, meters
    d_q: tuple          # tag -> U_k, meters
    carrier_freq: float = 3e9

    def __post_init__(self):
        object.__setattr__(self, "d_h", tuple(float(d) for d in np.atleast_1d(self.d_h)))
        object.__setattr__(self, "d_q", tuple(float(d) for d in np.atleast_1d(self.d_q)))
        if len(self.d_h) != len(self.d_q):
            raise InvalidInput("d_h and d_q must list one distance per user")
        if min(self.d_h + self.d_q + (self.d_f,)) <= 0 or self.carrier_freq <= 0:
            raise InvalidInput("distances and carrier frequency must be positive")

    @property
    def num_users(self):
        return len(self.d_h)


@dataclass(frozen=True)
class LinkBudget:
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 10.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise InvalidInput("bandwidth must be positive")


def path_loss_db(d, f_c=3e9, variant="nlos"):
    """3GPP UMi street-canyon path loss in dB (d in meters, f_c in Hz)."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 1.0):
        raise InvalidInput("path-loss model is defined for d >= 1 m")
    fghz = f_c / 1e9
    if variant == "nlos":
        pl = 36.7 * np.log10(d) + 22.7 + 26.0 * np.log10(fghz)
    elif variant == "los":
        pl = 22.0 * np.log10(d) + 28.0 + 20.0 * np.log10(fghz)
    else:
        raise InvalidInput(f"unknown path-loss variant {variant!r}")
    return float(pl) if pl.ndim == 0 else pl


def large_scale_gain(d, f_c=3e9, variant="nlos"):
    return 10.0 ** (-np.asarray(path_loss_db(d, f_c, variant)) / 10.0)


def noise_power_watts(budget=None):
    budget = budget or LinkBudget()
    dbm = budget.noise_psd_dbm_hz + 10.0 * np.log10(budget.bandwidth_hz) + budget.noise_figure_db
    return float(dbm_to_watts(dbm))


def make_rng(seed):
    """Counter-based generator with an explicit 64-bit key."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def trial_seed(base_seed, trial):
    return (int(base_seed) ^ int(trial)) & (2**64 - 1)


def cn(rng, shape):
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(seed, params, geometry, shadowing_std_db=0.0, variant="nlos"):
    """Draw one ChannelSet.  Fully determined by (seed, params, geometry)."""
    K, M = params.num_users, params.num_antennas
    if geometry.num_users != K:
        raise InvalidInput(f"geometry has {geometry.num_users} users, params has {K}")
    rng = make_rng(seed)
    fc = geometry.carrier_freq
    zh = large_scale_gain(geometry.d_h, fc, variant)
    zf = large_scale_gain(geometry.d_f, fc, variant)
    zq = large_scale_gain(geometry.d_q, fc, variant)
    h = cn(rng, (K, M))
    f = cn(rng, M)
    q = cn(rng, K)
    if shadowing_std_db > 0:
        sh = 10.0 ** (shadowing_std_db * rng.standard_normal(2 * K + 1) / 10.0)
        zh, zf, zq = zh * sh[:K], zf * sh[K], zq * sh[K + 1:]
    return ChannelSet(np.sqrt(zh)[:, None] * h, np.sqrt(zf) * f, np.sqrt(zq) * q)
