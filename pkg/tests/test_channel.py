import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noma_backscatter.channel import (
    Geometry,
    LinkBudget,
    large_scale_gain,
    noise_power_watts,
    path_loss_db,
    sample_channels,
    trial_seed,
)
from noma_backscatter.model import InvalidInput, SystemParams
from noma_backscatter.units import dbm_to_watts, watts_to_dbm


def params(K=2, M=8):
    return SystemParams(M, K, 0.5, 0.6, 1e-9, 1e-12, np.ones(K), np.full(K + 1, 1 / (K + 1)),
                        np.zeros(K + 1), 1.0)


def test_path_loss_reference_value():
    # 36.7 log10(10) + 22.7 + 26 log10(3)
    assert path_loss_db(10.0) == pytest.approx(71.80515262271123, abs=1e-12)
    assert path_loss_db(10.0, variant="los") == pytest.approx(22 + 28 + 20 * math.log10(3), abs=1e-12)


def test_path_loss_rejects_short_distance_and_unknown_variant():
    with pytest.raises(InvalidInput):
        path_loss_db(0.5)
    with pytest.raises(InvalidInput):
        path_loss_db(10.0, variant="indoor")


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 500.0), st.floats(1.01, 4.0))
def test_path_loss_increases_with_distance(d, factor):
    assert path_loss_db(d * factor) > path_loss_db(d)
    assert large_scale_gain(d * factor) < large_scale_gain(d)


def test_noise_power_default_budget():
    # -174 + 70 + 10 = -94 dBm
    assert watts_to_dbm(noise_power_watts()) == pytest.approx(-94.0, abs=1e-12)
    assert noise_power_watts(LinkBudget(bandwidth_hz=1e6)) == pytest.approx(noise_power_watts() / 10)


def test_unit_conversions_round_trip():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    for v in (-60.0, 0.0, 17.5):
        assert watts_to_dbm(dbm_to_watts(v)) == pytest.approx(v)


def test_geometry_validation():
    with pytest.raises(InvalidInput):
        Geometry((10.0, 10.0), 3.0, (8.0,))
    with pytest.raises(InvalidInput):
        Geometry((10.0,), -1.0, (8.0,))


def test_trial_seed_is_xor():
    assert trial_seed(2024, 0) == 2024
    assert trial_seed(2024, 5) == 2024 ^ 5


def test_sampling_is_deterministic_and_shaped():
    g = Geometry((10.0, 12.0), 3.0, (8.0, 9.0))
    a = sample_channels(7, params(), g)
    b = sample_channels(7, params(), g)
    c = sample_channels(8, params(), g)
    assert a.h.shape == (2, 8) and a.f.shape == (8,) and a.q.shape == (2,)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.q, b.q)
    assert not np.array_equal(a.h, c.h)


def test_sampled_powers_follow_path_loss():
    g = Geometry((10.0, 20.0), 3.0, (8.0, 9.0))
    p = params(M=64)
    hs = np.array([np.mean(np.abs(sample_channels(s, p, g).h) ** 2, axis=1) for s in range(200)])
    ratio = hs.mean(axis=0) / large_scale_gain(np.array(g.d_h))
    assert np.allclose(ratio, 1.0, rtol=0.03)


def test_shadowing_changes_draws_only_when_enabled():
    g = Geometry((10.0, 12.0), 3.0, (8.0, 9.0))
    a = sample_channels(3, params(), g)
    b = sample_channels(3, params(), g, shadowing_std_db=8.0)
    assert not np.allclose(np.abs(a.h), np.abs(b.h))
    # fading draws are shared: the direction of h_1 is unchanged
    u = a.h[0] / np.linalg.norm(a.h[0])
    v = b.h[0] / np.linalg.norm(b.h[0])
    assert abs(np.vdot(u, v)) == pytest.approx(1.0)
