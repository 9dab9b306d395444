"""Flip/hold state machine: oracles, properties and closed forms."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrngsim.postproc import (
    EVENT_A,
    EVENT_B,
    EVENT_NONE,
    ClickProbs,
    PpEvents,
    PpState,
    Rule,
    estimate_mismatch,
    event_probs,
    flip_hold_bias,
    flip_hold_bias_per_output,
    flip_hold_per_output,
    flip_hold_probs,
    pp_run,
    pp_step,
)
from qrngsim.validate import iid_events, monte_carlo_flip_hold

probs = st.floats(0.0, 0.95, allow_nan=False)
event_codes = st.lists(st.sampled_from([EVENT_NONE, EVENT_A, EVENT_B]), max_size=200)
states = st.builds(PpState, st.integers(0, 1), st.integers(0, 1))


def markov_flip_hold(p1, p2, rule):
    """Independent oracle: stationary distribution of s, then P(flip), P(hold) per cycle.

    Built from a literal transition table rather than the package's own helpers.
    """
    alpha, beta = p1 * (1 - p2), p2 * (1 - p1)
    e = 1 - alpha - beta
    nxt = {
        Rule.SET: {(0, "A"): 0, (1, "A"): 0, (0, "B"): 1, (1, "B"): 1},
        Rule.A_KEEPS_B_TOGGLES: {(0, "A"): 0, (1, "A"): 1, (0, "B"): 1, (1, "B"): 0},
        Rule.TOGGLE_ALWAYS: {(0, "A"): 1, (1, "A"): 0, (0, "B"): 1, (1, "B"): 0},
    }[rule]
    T = np.zeros((2, 2))
    for s in (0, 1):
        T[s, 1 - s] += e
        T[s, nxt[(s, "A")]] += alpha
        T[s, nxt[(s, "B")]] += beta
    w, v = np.linalg.eig(T.T)
    pi = np.real(v[:, np.argmin(abs(w - 1))])
    pi = pi / pi.sum()
    # flip on A in s=0 and on B in s=1
    flip = pi[0] * alpha + pi[1] * beta
    hold = pi[0] * beta + pi[1] * alpha
    return flip, hold


# --- [TRIVIAL] single transitions -------------------------------------------------------------

@pytest.mark.parametrize(
    "s, x, ev, new_s, bit",
    [
        (0, 0, EVENT_A, 0, 1),  # A in s=0 flips
        (0, 1, EVENT_B, 1, 1),  # B in s=0 holds
        (1, 0, EVENT_A, 0, 0),  # A in s=1 holds
        (1, 1, EVENT_B, 1, 0),  # B in s=1 flips
        (0, 1, EVENT_NONE, 1, None),
        (1, 0, EVENT_NONE, 0, None),
    ],
)
def test_single_step_table(s, x, ev, new_s, bit):
    state, out = pp_step(PpState(s, x), ev)
    assert state.s == new_s
    assert out == bit
    if bit is None:
        assert state.last_bit == x


def test_pp_events_reject_both():
    with pytest.raises(ValueError):
        PpEvents(a=True, b=True)
    assert PpEvents(a=True).code == EVENT_A
    assert PpEvents().code == EVENT_NONE


def test_pp_step_rejects_unknown_code():
    with pytest.raises(ValueError):
        pp_step(PpState(), 7)


# --- properties ---------------------------------------------------------------------------------------

@given(event_codes, states, st.sampled_from(list(Rule)))
def test_pp_run_matches_pp_step(events, state, rule):
    bits, final, n_flip = pp_run(np.array(events, dtype=np.uint8), state, rule)
    s = state
    ref, flips, last = [], 0, state.last_bit
    for e in events:
        s, b = pp_step(s, e, rule)
        if b is not None:
            flips += b != last
            last = b
            ref.append(b)
    assert bits.tolist() == ref
    assert final == s
    assert n_flip == flips


@given(event_codes, states)
def test_one_bit_per_valid_event(events, state):
    bits, _, _ = pp_run(np.array(events, dtype=np.uint8), state)
    assert bits.size == sum(e != EVENT_NONE for e in events)


@given(event_codes, states)
def test_runs_concatenate(events, state):
    ev = np.array(events, dtype=np.uint8)
    k = len(events) // 2
    b1, mid, f1 = pp_run(ev[:k], state)
    b2, end, f2 = pp_run(ev[k:], mid)
    b, end_all, f = pp_run(ev, state)
    assert np.array_equal(np.concatenate([b1, b2]), b)
    assert end == end_all and f1 + f2 == f


@given(probs, probs)
def test_event_probs_partition(p1, p2):
    a, b, e = event_probs(p1, p2)
    assert min(a, b, e) >= 0
    assert a + b + e == pytest.approx(1.0)
    c = ClickProbs(p1, p2)
    assert (c.alpha, c.beta) == pytest.approx((a, b))


# --- [DERIVED] closed forms against the Markov oracle ---------------------------------------------------

@given(st.floats(0.01, 0.95), st.floats(0.01, 0.95))
def test_closed_form_matches_markov_oracle(p1, p2):
    a, b, _ = event_probs(p1, p2)
    assert flip_hold_probs(a, b) == pytest.approx(markov_flip_hold(p1, p2, Rule.SET), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("rule", [Rule.A_KEEPS_B_TOGGLES, Rule.TOGGLE_ALWAYS])
def test_alternative_rules_give_no_bias(rule):
    for p1, p2 in [(0.3, 0.25), (0.1, 0.45)]:
        f, h = markov_flip_hold(p1, p2, rule)
        a, b, _ = event_probs(p1, p2)
        assert f == pytest.approx((a + b) / 2) and h == pytest.approx((a + b) / 2)
        assert abs(f - flip_hold_probs(a, b)[0]) > 1e-4


@given(st.floats(0.0, 0.95), st.floats(0.0, 0.95))
def test_bias_properties(p1, p2):
    bias, bound = flip_hold_bias(p1, p2)
    assert bias >= bound - 1e-15 >= -1e-15
    assert bound == pytest.approx((p1 - p2) ** 2 / 2)
    assert flip_hold_bias(p2, p1)[0] == pytest.approx(bias)
    a, b, _ = event_probs(p1, p2)
    if a + b > 0:
        f, h = flip_hold_probs(a, b)
        assert f - h == pytest.approx(bias, abs=1e-12)
        of, oh = flip_hold_per_output(a, b)
        assert of + oh == pytest.approx(1.0)
        assert of - oh == pytest.approx(flip_hold_bias_per_output(p1, p2), abs=1e-12)


def test_equal_probs_no_bias():
    a, b, _ = event_probs(0.28, 0.28)
    f, h = flip_hold_probs(a, b)
    assert f == pytest.approx(h)


@pytest.mark.parametrize("p1, p2", [(0.28, 0.28), (0.30, 0.25), (0.10, 0.45)])
def test_simulated_frequencies_match_closed_form(p1, p2):
    est = monte_carlo_flip_hold(p1, p2, 4 * 10**6, seed=3, batch=2 * 10**5)
    a, b, _ = event_probs(p1, p2)
    f, h = flip_hold_probs(a, b)
    assert abs(est.p_flip - f) < 4 * est.se_flip
    assert abs(est.p_hold - h) < 4 * est.se_hold


def test_wrong_rule_is_caught_by_simulation():
    p1, p2 = 0.10, 0.45
    est = monte_carlo_flip_hold(p1, p2, 4 * 10**6, seed=4, rule=Rule.A_KEEPS_B_TOGGLES, batch=2 * 10**5)
    a, b, _ = event_probs(p1, p2)
    f, _ = flip_hold_probs(a, b)
    assert abs(est.p_flip - f) > 4 * est.se_flip


# --- inversion ---------------------------------------------------------------------------------------------

@given(st.floats(0.05, 0.6), st.floats(0.0, 0.08))
def test_mismatch_inversion_round_trip(p, d):
    p1, p2 = p + d / 2, p - d / 2
    bias, _ = flip_hold_bias(p1, p2)
    # the inversion treats the denominator at the average p, exact to O(d^2)
    assert estimate_mismatch(bias, p) == pytest.approx(d, rel=0.02, abs=1e-9)
    per_out = flip_hold_bias_per_output(p1, p2)
    assert estimate_mismatch(per_out, p, per_output=True) == pytest.approx(d, rel=0.02, abs=1e-9)


def test_inversion_rejects_bad_input():
    with pytest.raises(ValueError):
        estimate_mismatch(-1e-4, 0.3)
    with pytest.raises(ValueError):
        estimate_mismatch(1e-4, 1.0)


def test_quadratic_coefficient_at_operating_point():
    # per-cycle excess / (dp)^2 -> 1 / (2 - 2p + 2p^2) = 1/1.5968 at p = 0.28
    d = 1e-3
    bias, _ = flip_hold_bias(0.28 + d / 2, 0.28 - d / 2)
    assert bias / d**2 == pytest.approx(1 / (2 - 2 * 0.28 + 2 * 0.28**2), rel=1e-5)
    assert bias / d**2 == pytest.approx(1 / 1.6, rel=0.01)


def test_iid_events_frequencies(rng):
    ev = iid_events(rng, 0.3, 0.2, 10**6)
    a, b, e = event_probs(0.3, 0.2)
    for code, p in ((EVENT_A, a), (EVENT_B, b), (EVENT_NONE, e)):
        assert np.mean(ev == code) == pytest.approx(p, abs=5 * math.sqrt(p / 10**6))


def test_rule_enumeration_is_complete():
    assert {r.value for r in Rule} == {0, 1, 2}
    assert list(itertools.islice(Rule, 1))[0] is Rule.SET
