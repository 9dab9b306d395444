"""Flip/hold post-processing state machine and its closed-form output statistics.

The machine keeps an internal bit ``s`` and the last emitted bit ``last_bit``.  A cycle
with a valid click on detector 1 only is event A, on detector 2 only is event B; anything
else (no click, both clicked, late clicks) emits nothing and toggles ``s``.

On A the output flips when ``s == 0`` and holds when ``s == 1``; on B it is the other way
round.  After A the state is ``s = 0`` and after B it is ``s = 1``.  For ``s = 0`` this
is exactly "A keeps s, B toggles s"; the ``s = 1`` transitions are the ones under which the
long-run flip and hold frequencies equal :func:`flip_hold_probs` (checked by simulation in
the test suite).  Two alternative rules are kept for mutation testing.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

EVENT_NONE = 0
EVENT_A = 1
EVENT_B = 2


class Rule(enum.IntEnum):
    """Transition rule for ``s`` on a valid event."""

    SET = 0  # A -> s=0, B -> s=1 (default)
    A_KEEPS_B_TOGGLES = 1  # same in both states
    TOGGLE_ALWAYS = 2  # every event toggles s


@dataclass(frozen=True)
class PpState:
    s: int = 0
    last_bit: int = 0

    def __post_init__(self):
        if self.s not in (0, 1) or self.last_bit not in (0, 1):
            raise ValueError("state bits must be 0 or 1")


@dataclass(frozen=True)
class PpEvents:
    a: bool = False
    b: bool = False

    def __post_init__(self):
        if self.a and self.b:
            raise ValueError("events A and B are exclusive; map 'both' to neither")

    @property
    def code(self) -> int:
        return EVENT_A if self.a else EVENT_B if self.b else EVENT_NONE


@dataclass(frozen=True)
class ClickProbs:
    p1: float
    p2: float

    def __post_init__(self):
        _check_p(self.p1, self.p2)

    @property
    def alpha(self) -> float:
        return self.p1 * (1.0 - self.p2)

    @property
    def beta(self) -> float:
        return self.p2 * (1.0 - self.p1)


def _check_p(p1, p2):
    if not (0.0 <= p1 < 1.0 and 0.0 <= p2 < 1.0):
        raise ValueError(f"click probabilities must lie in [0, 1), got ({p1}, {p2})")


def _next_s(s: int, event: int, rule: int) -> int:
    if event == EVENT_NONE:
        return 1 - s
    if rule == Rule.SET:
        return 0 if event == EVENT_A else 1
    if rule == Rule.A_KEEPS_B_TOGGLES:
        return s if event == EVENT_A else 1 - s
    return 1 - s


def pp_step(state: PpState, events, rule: Rule = Rule.SET) -> tuple[PpState, int | None]:
    """Advance the machine by one cycle.

    ``events`` is a :class:`PpEvents` or an event code (0 none/both, 1 A, 2 B).
    Returns the new state and the emitted bit, or ``None`` if nothing was emitted.
    """
    code = events.code if isinstance(events, PpEvents) else int(events)
    if code not in (EVENT_NONE, EVENT_A, EVENT_B):
        raise ValueError(f"unknown event code {code}")
    s, x = state.s, state.last_bit
    new_s = _next_s(s, code, rule)
    if code == EVENT_NONE:
        return PpState(new_s, x), None
    flip = (code == EVENT_A) == (s == 0)
    bit = 1 - x if flip else x
    return PpState(new_s, bit), bit


@njit(cache=True)
def _pp_run(events, s, x, rule, out):
    n_out = 0
    flips = 0
    for i in range(events.shape[0]):
        e = events[i]
        if e == 0:
            s = 1 - s
            continue
        is_a = e == 1
        flip = is_a == (s == 0)
        if flip:
            x = 1 - x
            flips += 1
        out[n_out] = x
        n_out += 1
        if rule == 0:
            s = 0 if is_a else 1
        elif rule == 1:
            if not is_a:
                s = 1 - s
        else:
            s = 1 - s
    return s, x, n_out, flips


def pp_run(events: np.ndarray, state: PpState = PpState(), rule: Rule = Rule.SET):
    """Run the machine over an array of event codes.

    Returns ``(bits, final_state, n_flip)``; ``bits`` is a uint8 array of emitted bits and
    ``n_flip`` counts emissions that inverted the previous output bit (the first emission
    is compared with ``state.last_bit``).
    """
    ev = np.ascontiguousarray(events, dtype=np.uint8)
    out = np.empty(ev.shape[0], dtype=np.uint8)
    s, x, n, flips = _pp_run(ev, state.s, state.last_bit, int(rule), out)
    return out[:n], PpState(int(s), int(x)), int(flips)


def event_probs(p1: float, p2: float) -> tuple[float, float, float]:
    """(alpha, beta, p_empty): P(only detector 1), P(only detector 2), P(neither event)."""
    _check_p(p1, p2)
    alpha = p1 * (1.0 - p2)
    beta = p2 * (1.0 - p1)
    return alpha, beta, 1.0 - alpha - beta


def flip_hold_probs(alpha: float, beta: float) -> tuple[float, float]:
    """Per-cycle probabilities that a cycle emits a flipped / held bit.

    They sum to ``alpha + beta``, the probability that a cycle emits anything.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    total = alpha + beta
    if total <= 0:
        raise ValueError("alpha + beta = 0: no output is ever produced")
    if total > 1:
        raise ValueError("alpha + beta must not exceed 1")
    f, h = _per_output(alpha, beta, total)
    return total * f, total * h


def _per_output(alpha, beta, total):
    # the per-cycle forms divided by alpha + beta; working with the shares a and b keeps
    # small probabilities from underflowing and 1 - q^2 from cancelling
    a = alpha / total
    b = beta / total
    q = 1.0 - total
    sq = a * a + b * b
    return (sq + 2.0 * a * b * q) / (2.0 - total), (2.0 * a * b + sq * q) / (2.0 - total)


def flip_hold_per_output(alpha: float, beta: float) -> tuple[float, float]:
    """Flip / hold probabilities conditional on a bit being emitted (they sum to one)."""
    flip_hold_probs(alpha, beta)  # validates
    return _per_output(alpha, beta, alpha + beta)


def flip_hold_bias(p1: float, p2: float) -> tuple[float, float]:
    """P(flip) - P(hold) per cycle, and its lower bound (p1 - p2)^2 / 2."""
    _check_p(p1, p2)
    d2 = (p1 - p2) ** 2
    return d2 / (2.0 - p1 - p2 + 2.0 * p1 * p2), d2 / 2.0


def flip_hold_bias_per_output(p1: float, p2: float) -> float:
    """Expected (N_flip - N_hold) / (N_flip + N_hold) of the emitted stream."""
    alpha, beta, _ = event_probs(p1, p2)
    bias, _ = flip_hold_bias(p1, p2)
    return bias / (alpha + beta)


def estimate_mismatch(measured_bias: float, p_avg: float, per_output: bool = False) -> float:
    """Invert the quadratic bias law to |p1 - p2|.

    ``measured_bias`` is the per-cycle flip excess by default.  With ``per_output=True`` it
    is read as the relative flip/hold deviation of the emitted stream and converted with the
    emission probability ``2 p (1 - p)`` of a symmetric pair.
    """
    if measured_bias < 0:
        raise ValueError("negative bias: hold-dominant stream is outside the model")
    if not 0.0 < p_avg < 1.0:
        raise ValueError("p_avg must lie in (0, 1)")
    if per_output:
        measured_bias = measured_bias * 2.0 * p_avg * (1.0 - p_avg)
    return math.sqrt((2.0 - 2.0 * p_avg + 2.0 * p_avg * p_avg) * measured_bias)
