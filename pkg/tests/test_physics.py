import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrngsim.physics import (
    AfterpulseState,
    DetectorParams,
    Kind,
    OpticalParams,
    click_prob,
    coherence_time,
    cw_click_train,
    dark_rate,
    dark_share,
    sample_cycle,
)


def test_coherence_time_value():
    # lambda^2 / (2 pi c dlambda) for 820 nm and 20 nm
    expected = (820e-9) ** 2 / (2 * math.pi * 299_792_458.0 * 20e-9)
    assert coherence_time(OpticalParams()) == pytest.approx(expected)
    assert coherence_time(OpticalParams()) == pytest.approx(1.785e-14, rel=1e-3)


def test_optical_validation():
    with pytest.raises(ValueError):
        OpticalParams(half_bandwidth=0.0)
    with pytest.raises(ValueError):
        OpticalParams(mean_photons_per_pulse_ch1=-1)


def test_detector_validation():
    with pytest.raises(ValueError):
        DetectorParams(late_click_prob=1.0)
    with pytest.raises(ValueError):
        DetectorParams(efficiency_ch1=1.5)
    with pytest.raises(ValueError):
        DetectorParams(late_offset_ns=(30.0, 20.0))


def test_dark_rate_doubles_every_8_degrees():
    d = DetectorParams()
    assert dark_rate(70.0, d) == pytest.approx(500.0)
    assert dark_rate(62.0, d) == pytest.approx(250.0)
    assert dark_rate(500.0, d) == dark_rate(100.0, d)  # clamped


@given(st.floats(0, 5), st.floats(0, 1), st.floats(0, 1e5), st.floats(1e-9, 1e-7))
def test_click_prob_is_poisson(mu, eta, dark, w):
    p = click_prob(mu, eta, dark, w)
    assert p == pytest.approx(1 - math.exp(-(mu * eta + dark * w)), abs=1e-12)
    assert 0 <= p < 1 or mu * eta + dark * w > 30
    assert 0 <= dark_share(mu, eta, dark, w) <= 1


def test_click_prob_monotone():
    ps = [click_prob(mu, 0.5, 0.0, 25e-9) for mu in np.linspace(0, 3, 10)]
    assert np.all(np.diff(ps) > 0)


def test_sample_cycle_frequencies(rng):
    det = DetectorParams(late_click_prob=0.1)
    n = 40000
    c1 = late1 = 0
    for _ in range(n):
        o = sample_cycle(rng, 0.3, 0.2, det)
        c1 += o.det1 != Kind.NONE
        late1 += o.det1 == Kind.LATE
        assert o.cycle_duration == (150 if Kind.PROMPT in (o.det1, o.det2) else 50)
    assert c1 / n == pytest.approx(0.3, abs=5 * math.sqrt(0.21 / n))
    assert late1 / n == pytest.approx(0.03, abs=5 * math.sqrt(0.03 / n))


def test_sample_cycle_backflash_pairs(rng):
    det = DetectorParams(late_click_prob=0.0, backflash_prob=0.5)
    n = 20000
    both = sum(sample_cycle(rng, 0.2, 0.0, det).both_prompt for _ in range(n))
    assert both / n == pytest.approx(0.1, abs=0.01)


def test_afterpulse_state_decays_and_charges(rng):
    det = DetectorParams(afterpulse_prob=0.5)
    ap = AfterpulseState()
    sample_cycle(rng, 0.999, 0.0, det, afterpulse=ap)
    assert ap.pending1 == pytest.approx(0.5)
    before = ap.pending1
    for _ in range(5):
        sample_cycle(rng, 0.0, 0.0, det, afterpulse=ap)
    assert ap.pending1 < before


def test_cw_train_rate_and_deadtime(rng):
    t = cw_click_train(1e6, 0.05, rng, deadtime_ns=150.0)
    # non-paralyzable dead time: observed rate r / (1 + r tau)
    expected = 1e6 / (1 + 1e6 * 150e-9) * 0.05
    assert t.size == pytest.approx(expected, rel=0.02)
    assert np.all(np.diff(t) >= 150.0)


def test_cw_train_modulation_mean_rate(rng):
    t = cw_click_train(1e6, 0.05, rng, modulation_depth=0.5, modulation_freq_hz=5e6)
    assert t.size == pytest.approx(5e4, rel=0.03)
    with pytest.raises(ValueError):
        cw_click_train(1e6, 1.0, rng, modulation_depth=1.5)
