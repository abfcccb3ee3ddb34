import numpy as np
import pytest

from noma_backscatter.baselines import (
    OrderingUnsatisfiable,
    baseline_split,
    candidate_directions,
    random_beamformer,
    weighted_mrt,
)
from noma_backscatter.model import BeamMode, ChannelSet, noma_order_satisfied


def channels(seed=0, K=2, M=8):
    rng = np.random.default_rng(seed)
    c = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    return ChannelSet(c(K, M), c(M), c(K))


def test_random_beamformer_respects_order_and_seed():
    ch = channels()
    a = random_beamformer(3, ch)
    assert noma_order_satisfied(ch, a)
    assert np.linalg.norm(a.w) == pytest.approx(1.0)
    assert np.array_equal(a.w, random_beamformer(3, ch).w)
    cm = random_beamformer(3, ch, BeamMode.CONSTANT_MODULUS)
    assert np.allclose(np.abs(cm.w), 1 / np.sqrt(8))


def test_random_beamformer_gives_up_when_order_impossible():
    h = np.array([[1.0, 0.0], [2.0, 0.0]], dtype=complex)  # U_2 always stronger
    ch = ChannelSet(h, np.ones(2), np.ones(2))
    with pytest.raises(OrderingUnsatisfiable):
        random_beamformer(0, ch, max_draws=50)


def test_weighted_mrt_single_user_is_matched_filter():
    ch = channels(K=1)
    w = weighted_mrt(ch)
    assert abs(np.vdot(ch.h[0], w.w)) == pytest.approx(np.linalg.norm(ch.h[0]))


def test_weighted_mrt_is_normalized_combination():
    ch = channels(1)
    w = weighted_mrt(ch, [0.7, 0.3]).w
    hn = ch.h / np.linalg.norm(ch.h, axis=1, keepdims=True)
    v = 0.7 * hn[0] + 0.3 * hn[1]
    assert np.allclose(w, v / np.linalg.norm(v))


def test_baseline_split():
    assert np.allclose(baseline_split(2), [0.3, 0.7])
    assert np.allclose(baseline_split(3), [0.3, 0.35, 0.35])
    assert np.allclose(baseline_split(1), [1.0])
    with pytest.raises(ValueError):
        baseline_split(4, 0.3)


def test_candidate_directions_are_unit_norm():
    ds = candidate_directions(channels(), seed=1, num_random=4)
    assert len(ds) == 1 + 4 + 6 + 1 + 4
    assert all(np.linalg.norm(d) == pytest.approx(1.0) for d in ds)
