"""Reference beamformers: random (ordering-constrained) and weighted MRT."""

import numpy as np

from .channel import cn, make_rng
from .model import Beamformer, BeamMode, noma_order_satisfied, project_constant_modulus

BASELINE_RHO1 = 0.3
MAX_DRAWS = 10_000


class OrderingUnsatisfiable(RuntimeError):
    pass


def random_beamformer(seed, channels, mode=BeamMode.DIGITAL, max_draws=MAX_DRAWS):
    """Complex Gaussian direction, redrawn until the NOMA gain order holds."""
    rng = make_rng(seed)
    M = channels.num_antennas
    for _ in range(max_draws):
        v = cn(rng, M)
        w = Beamformer.from_direction(v, mode)
        if noma_order_satisfied(channels, w):
            return w
    raise OrderingUnsatisfiable(f"no ordered draw in {max_draws} attempts")


def weighted_mrt(channels, weights=None):
    """sum_k c_k h_k/||h_k||, normalized; uniform c_k = 1/K unless given."""
    h = channels.h
    K = h.shape[0]
    c = np.full(K, 1.0 / K) if weights is None else np.asarray(weights, dtype=float)
    v = (c[:, None] * h / np.linalg.norm(h, axis=1, keepdims=True)).sum(axis=0)
    return Beamformer.from_direction(v)


def baseline_split(K, rho1=BASELINE_RHO1):
    """Fixed split used with the baselines: rho_1 given, the rest shared equally."""
    if K == 1:
        return np.ones(1)
    rest = (1.0 - rho1) / (K - 1)
    if rest < rho1:
        raise ValueError("rho_1 too large for a nondecreasing split")
    return np.concatenate([[rho1], np.full(K - 1, rest)])


def candidate_directions(channels, seed=0, num_random=10):
    """Starting beams: weighted MRT, MRT tilted to U_1, blends with the tag link, random draws."""
    h, f = channels.h, channels.f
    K = h.shape[0]
    hn = h / np.linalg.norm(h, axis=1, keepdims=True)
    fn = f / np.linalg.norm(f)
    mrt = weighted_mrt(channels).w
    out = [mrt]
    for tilt in (0.5, 1.0, 2.0, 4.0):
        c = np.ones(K)
        c[0] += tilt
        out.append(weighted_mrt(channels, c / c.sum()).w)
    for mu in (0.25, 0.5, 0.75):
        out.append((1 - mu) * mrt + mu * fn)
        out.append((1 - mu) * hn[0] + mu * fn)
    out.append(fn)
    rng = make_rng(seed)
    out.extend(cn(rng, h.shape[1]) for _ in range(num_random))
    return [v / np.linalg.norm(v) for v in out if np.linalg.norm(v) > 0]
