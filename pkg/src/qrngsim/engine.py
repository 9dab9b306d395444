"""Compiled cycle loops behind :func:`qrngsim.device.run_simulation`.

Two kernels share the same per-click decision rules:

* ``dense_kernel`` walks every cycle and supports the feedback loop, afterpulsing and
  efficiency modulation.
* ``sparse_kernel`` jumps over runs of silent cycles with a geometric draw.  It needs
  constant click probabilities and is the only practical way to collect millions of dark
  clicks; an empty cycle only toggles the post-processing state, so the jump is exact.

Each channel decides its click from one uniform ``u``.  With ``q`` the total click
probability (own Poisson click ``p`` plus afterpulse), ``u < p`` is an own click and
``u / p`` is re-used (rescaled) for the dark attribution and the late decision;
``p <= u < q`` is an afterpulse; otherwise ``(u - q) / (1 - q)`` is a fresh uniform for
the backflash decision.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# indices into the float parameter vector
P_MODE_FIXED = 0  # 1.0 when p1/p2 below are used directly
P_P1 = 1
P_P2 = 2
P_MU1 = 3
P_MU2 = 4
P_EFF1 = 5
P_EFF2 = 6
P_DARK_LAMBDA = 7  # dark_rate * window
P_LATE = 8
P_BACKFLASH = 9
P_AP_PROB = 10
P_AP_DECAY_NS = 11
P_WINDOW_NS = 12
P_ETA_MAX = 13
P_V_HALF = 14
P_V_WIDTH = 15
P_MOD_DEPTH = 16
P_MOD_FREQ = 17  # Hz
P_FEEDBACK_ON = 18
P_COUNTER_WINDOW_NS = 19
P_GAIN = 20
P_TAU_NS = 21
P_V_MIN = 22
P_V_MAX = 23
P_TARGET_HZ = 24
P_COUNT_ANY = 25  # 1.0: counter tallies any-prompt cycles instead of singles
P_PROMPT_OFF = 26
P_PROMPT_JIT = 27
P_LATE_LO = 28
P_LATE_HI = 29
P_BF_JIT = 30
P_EMPTY_NS = 31
P_CLICK_NS = 32
P_SHARE1 = 33  # dark share for fixed mode
P_SHARE2 = 34
N_PARAMS = 35

# float state
S_S = 0
S_X = 1
S_INTEG = 2
S_V = 3
S_COUNT = 4
S_ELAPSED = 5
S_PEND1 = 6
S_PEND2 = 7
S_NWIN = 8  # closed counter windows
N_FSTATE = 9

# int64 state / counters
I_T = 0
I_CYCLES = 1
I_EMPTY = 2
I_SINGLE = 3
I_BOTH = 4
I_LATE = 5
I_BITS = 6
I_DARK_BITS = 7
I_BF_BITS = 8
I_BF_CLICKS = 9
I_AP_CLICKS = 10
I_DARK_CLICKS = 11
I_FLIPS = 12
N_ISTATE = 13

KIND_NONE = 0
KIND_PROMPT = 1
KIND_LATE = 2

SRC_LIGHT = 0
SRC_DARK = 1
SRC_AFTERPULSE = 2
SRC_BACKFLASH = 3


# Per-cycle helpers take scalars only: every array argument of a compiled call costs a
# reference-count round trip, which dominated the loop when state lived in arrays.


@njit(cache=True)
def _probs(v, t_ns, l1, l2, dark, eta_max, v_half, width, depth, freq):
    """(p1, p2, dark share 1, dark share 2) at bias ``v`` and time ``t_ns``."""
    eta = eta_max / (1.0 + math.exp(-(v - v_half) / width))
    if depth > 0.0:
        eta *= 1.0 + depth * math.sin(2.0 * math.pi * freq * t_ns * 1e-9)
        eta = min(max(eta, 0.0), 1.0)
    a1 = l1 * eta + dark
    a2 = l2 * eta + dark
    s1 = dark / a1 if a1 > 0.0 else 0.0
    s2 = dark / a2 if a2 > 0.0 else 0.0
    return -math.expm1(-a1), -math.expm1(-a2), s1, s2


@njit(cache=True)
def _decide(u, p, q, share, late):
    """Return (kind, source, backflash uniform) for one channel."""
    if u < q:
        if u < p:
            v = u / p
            if v < share:
                src = SRC_DARK
                v = v / share
            else:
                src = SRC_LIGHT
                v = (v - share) / (1.0 - share)
        else:
            src = SRC_AFTERPULSE
            v = (u - p) / (q - p)
        kind = KIND_LATE if v < late else KIND_PROMPT
        return kind, src, 1.0
    return KIND_NONE, SRC_LIGHT, (u - q) / (1.0 - q)


@njit(cache=True)
def _backflash(k1, k2, src1, src2, w1, w2, bf):
    """Let a prompt click seed the silent channel.  Returns (k1, k2, src1, src2, seed)."""
    if k1 == KIND_PROMPT and k2 == KIND_NONE and w2 < bf:
        return k1, KIND_PROMPT, src1, SRC_BACKFLASH, 1
    if k2 == KIND_PROMPT and k1 == KIND_NONE and w1 < bf:
        return KIND_PROMPT, k2, SRC_BACKFLASH, src2, 2
    return k1, k2, src1, src2, 0


@njit(cache=True)
def _classify(k1, k2):
    """Cycle class: 0 empty, 1 event A, 2 event B, 3 both prompt, 4 late only."""
    if k1 == KIND_PROMPT:
        return 3 if k2 == KIND_PROMPT else 1
    if k2 == KIND_PROMPT:
        return 2
    if k1 == KIND_LATE or k2 == KIND_LATE:
        return 4
    return 0


@njit(cache=True)
def _pp(s, x, cls):
    """Post-processing step.  Returns (s, x, emitted, flipped)."""
    if cls != 1 and cls != 2:
        return 1 - s, x, False, False
    is_a = cls == 1
    flip = is_a == (s == 0)
    if flip:
        x = 1 - x
    return (0 if is_a else 1), x, True, flip


@njit(cache=True)
def _click_time(t0, kind, j, prompt_off, prompt_jit, late_lo, late_hi):
    if kind == KIND_PROMPT:
        return t0 + prompt_off + j * prompt_jit
    return t0 + late_lo + j * (late_hi - late_lo)


@njit(cache=True)
def _event_times(t0, k1, k2, seed, j1, j2, prompt_off, prompt_jit, late_lo, late_hi, bf_jit):
    """Click times of both channels; a backflash click sits within ``bf_jit`` of its seed."""
    t1 = 0.0
    t2 = 0.0
    if seed == 1:
        t1 = _click_time(t0, k1, j1, prompt_off, prompt_jit, late_lo, late_hi)
        t2 = t1 + (2.0 * j2 - 1.0) * bf_jit
    elif seed == 2:
        t2 = _click_time(t0, k2, j2, prompt_off, prompt_jit, late_lo, late_hi)
        t1 = t2 + (2.0 * j1 - 1.0) * bf_jit
    else:
        if k1 != KIND_NONE:
            t1 = _click_time(t0, k1, j1, prompt_off, prompt_jit, late_lo, late_hi)
        if k2 != KIND_NONE:
            t2 = _click_time(t0, k2, j2, prompt_off, prompt_jit, late_lo, late_hi)
    return t1, t2


@njit(cache=True)
def _feedback(valid, dt_ns, lag, v, integ, count, elapsed, window_ns, gain, target_hz, v_min, v_max):
    """Counter, integrator and supply lag for one cycle.

    The counter gate has a fixed period: a window closes at the first cycle end past the
    nominal boundary and the overshoot is carried into the next window.  ``lag`` is
    ``1 - exp(-dt / tau)``.  Returns (v, integ, count, elapsed, boundary).
    """
    if valid:
        count += 1.0
    elapsed += dt_ns
    v = v + (integ - v) * lag
    v = min(max(v, v_min), v_max)
    if elapsed >= window_ns * (1.0 - 1e-9):
        window_s = window_ns * 1e-9
        error = count / window_s - target_hz
        integ = min(max(integ - gain * error * window_s, v_min), v_max)
        return v, integ, 0.0, elapsed - window_ns, True
    return v, integ, count, elapsed, False


@njit(cache=True)
def dense_kernel(
    prm, fs, ist, u1, u2, jt, record, max_bits, t_stop,
    bits, ev_t, ev_ch, ev_kind, tr_t, tr_v, tr_c, cyc_k1, cyc_k2,
):
    """Run up to ``u1.size`` cycles.  Returns (cycles run, bits, events, trace samples)."""
    fixed = prm[P_MODE_FIXED] > 0.5
    l1 = prm[P_MU1] * prm[P_EFF1]
    l2 = prm[P_MU2] * prm[P_EFF2]
    dark = prm[P_DARK_LAMBDA]
    eta_max = prm[P_ETA_MAX]
    v_half = prm[P_V_HALF]
    width = prm[P_V_WIDTH]
    depth = prm[P_MOD_DEPTH]
    freq = prm[P_MOD_FREQ]
    late = prm[P_LATE]
    bf = prm[P_BACKFLASH]
    ap_prob = prm[P_AP_PROB]
    ap_on = ap_prob > 0.0
    ap_decay = prm[P_AP_DECAY_NS]
    exposure = -math.expm1(-prm[P_WINDOW_NS] / ap_decay) if ap_on else 0.0
    empty_ns = np.int64(prm[P_EMPTY_NS])
    click_ns = np.int64(prm[P_CLICK_NS])
    prompt_off = prm[P_PROMPT_OFF]
    prompt_jit = prm[P_PROMPT_JIT]
    late_lo = prm[P_LATE_LO]
    late_hi = prm[P_LATE_HI]
    bf_jit = prm[P_BF_JIT]
    feedback = prm[P_FEEDBACK_ON] > 0.5
    count_any = prm[P_COUNT_ANY] > 0.5
    window_ns = prm[P_COUNTER_WINDOW_NS]
    gain = prm[P_GAIN]
    lag_click = -math.expm1(-prm[P_CLICK_NS] / prm[P_TAU_NS])
    lag_empty = -math.expm1(-prm[P_EMPTY_NS] / prm[P_TAU_NS])
    target_hz = prm[P_TARGET_HZ]
    v_min = prm[P_V_MIN]
    v_max = prm[P_V_MAX]
    keep_cycles = cyc_k1.shape[0] > 0
    cap_bits = bits.shape[0]

    s = int(fs[S_S])
    x = int(fs[S_X])
    integ = fs[S_INTEG]
    v = fs[S_V]
    count = fs[S_COUNT]
    elapsed = fs[S_ELAPSED]
    pend1 = fs[S_PEND1]
    pend2 = fs[S_PEND2]
    n_win = fs[S_NWIN]
    t = ist[I_T]
    n_class = np.zeros(5, dtype=np.int64)
    total_bits = ist[I_BITS]
    n_dark_bits = 0
    n_bf_bits = 0
    n_bf = 0
    n_ap = 0
    n_dark = 0
    n_flips = 0

    if fixed:
        p1, p2, sh1, sh2 = prm[P_P1], prm[P_P2], prm[P_SHARE1], prm[P_SHARE2]
    else:
        p1, p2, sh1, sh2 = _probs(v, float(t), l1, l2, dark, eta_max, v_half, width, depth, freq)
    v_used = v
    n = u1.shape[0]
    nb = 0
    ne = 0
    ntr = 0
    i = 0
    while i < n:
        if total_bits >= max_bits or t >= t_stop:
            break
        if not fixed and (depth > 0.0 or v != v_used):
            p1, p2, sh1, sh2 = _probs(v, float(t), l1, l2, dark, eta_max, v_half, width, depth, freq)
            v_used = v
        q1 = p1
        q2 = p2
        if ap_on:
            q1 = 1.0 - (1.0 - p1) * math.exp(-pend1 * exposure)
            q2 = 1.0 - (1.0 - p2) * math.exp(-pend2 * exposure)
        k1, src1, w1 = _decide(u1[i], p1, q1, sh1, late)
        k2, src2, w2 = _decide(u2[i], p2, q2, sh2, late)
        k1, k2, src1, src2, seed = _backflash(k1, k2, src1, src2, w1, w2, bf)
        if seed != 0:
            n_bf += 1
        if k1 != KIND_NONE:
            n_ap += src1 == SRC_AFTERPULSE
            n_dark += src1 == SRC_DARK
        if k2 != KIND_NONE:
            n_ap += src2 == SRC_AFTERPULSE
            n_dark += src2 == SRC_DARK
        if record and (k1 != KIND_NONE or k2 != KIND_NONE):
            t1, t2 = _event_times(
                float(t), k1, k2, seed, jt[2 * i], jt[2 * i + 1],
                prompt_off, prompt_jit, late_lo, late_hi, bf_jit,
            )
            first_two = k1 != KIND_NONE and k2 != KIND_NONE and t2 < t1
            if first_two:
                ev_t[ne] = t2
                ev_ch[ne] = 2
                ev_kind[ne] = k2
                ne += 1
            if k1 != KIND_NONE:
                ev_t[ne] = t1
                ev_ch[ne] = 1
                ev_kind[ne] = k1
                ne += 1
            if k2 != KIND_NONE and not first_two:
                ev_t[ne] = t2
                ev_ch[ne] = 2
                ev_kind[ne] = k2
                ne += 1
        if keep_cycles:
            cyc_k1[i] = k1
            cyc_k2[i] = k2

        cls = _classify(k1, k2)
        n_class[cls] += 1
        s, x, emitted, flip = _pp(s, x, cls)
        if emitted:
            n_flips += flip
            if nb < cap_bits:
                bits[nb] = x
            nb += 1
            total_bits += 1
            src = src1 if cls == 1 else src2
            n_dark_bits += src == SRC_DARK
            n_bf_bits += src == SRC_BACKFLASH
        prompt = cls == 1 or cls == 2 or cls == 3
        dur = click_ns if prompt else empty_ns

        if ap_on:
            decay = math.exp(-dur / ap_decay)
            pend1 = pend1 * decay + (ap_prob if k1 != KIND_NONE else 0.0)
            pend2 = pend2 * decay + (ap_prob if k2 != KIND_NONE else 0.0)
        if feedback:
            valid = prompt if count_any else emitted
            v, integ, count, elapsed, boundary = _feedback(
                valid, float(dur), lag_click if prompt else lag_empty, v, integ, count,
                elapsed, window_ns, gain, target_hz, v_min, v_max,
            )
            if boundary:
                n_win += 1.0
                tr_t[ntr] = n_win * window_ns * 1e-9
                tr_v[ntr] = v
                tr_c[ntr] = integ
                ntr += 1
        t += dur
        i += 1

    fs[S_S] = s
    fs[S_X] = x
    fs[S_INTEG] = integ
    fs[S_V] = v
    fs[S_COUNT] = count
    fs[S_ELAPSED] = elapsed
    fs[S_PEND1] = pend1
    fs[S_PEND2] = pend2
    fs[S_NWIN] = n_win
    ist[I_T] = t
    ist[I_CYCLES] += i
    ist[I_EMPTY] += n_class[0]
    ist[I_SINGLE] += n_class[1] + n_class[2]
    ist[I_BOTH] += n_class[3]
    ist[I_LATE] += n_class[4]
    ist[I_BITS] = total_bits
    ist[I_DARK_BITS] += n_dark_bits
    ist[I_BF_BITS] += n_bf_bits
    ist[I_BF_CLICKS] += n_bf
    ist[I_AP_CLICKS] += n_ap
    ist[I_DARK_CLICKS] += n_dark
    ist[I_FLIPS] += n_flips
    return i, nb, ne, ntr


@njit(cache=True)
def sparse_kernel(
    prm, fs, ist, aux, u1, u2, jt, record, max_bits, max_cycles, t_stop,
    bits, ev_t, ev_ch, ev_kind,
):
    """Skip-ahead loop for constant probabilities.

    ``aux[2*i]`` draws the silent-run length and ``aux[2*i+1]`` which channels click in the
    next non-silent cycle.  Returns (click cycles consumed, bits, events).
    """
    p1 = prm[P_P1]
    p2 = prm[P_P2]
    sh1 = prm[P_SHARE1]
    sh2 = prm[P_SHARE2]
    late = prm[P_LATE]
    bf = prm[P_BACKFLASH]
    empty_ns = np.int64(prm[P_EMPTY_NS])
    click_ns = np.int64(prm[P_CLICK_NS])
    prompt_off = prm[P_PROMPT_OFF]
    prompt_jit = prm[P_PROMPT_JIT]
    late_lo = prm[P_LATE_LO]
    late_hi = prm[P_LATE_HI]
    bf_jit = prm[P_BF_JIT]
    silent = (1.0 - p1) * (1.0 - p2)
    any_click = 1.0 - silent
    log_silent = math.log(silent) if silent > 0.0 else -np.inf
    c10 = p1 * (1.0 - p2) / any_click if any_click > 0.0 else 0.0
    c01 = p2 * (1.0 - p1) / any_click if any_click > 0.0 else 0.0
    cap_bits = bits.shape[0]

    s = int(fs[S_S])
    x = int(fs[S_X])
    t = ist[I_T]
    cycles = ist[I_CYCLES]
    total_bits = ist[I_BITS]
    n_class = np.zeros(5, dtype=np.int64)
    n_dark_bits = 0
    n_bf_bits = 0
    n_bf = 0
    n_dark = 0
    n_flips = 0
    n = u1.shape[0]
    nb = 0
    ne = 0
    i = 0
    while i < n:
        if total_bits >= max_bits or cycles >= max_cycles or t >= t_stop:
            break
        r = aux[2 * i]
        if log_silent == -np.inf:
            k = np.int64(0)
        elif log_silent == 0.0:
            k = max_cycles
        else:
            kf = math.floor(math.log1p(-r) / log_silent)
            k = max_cycles if kf > 9.0e18 else np.int64(kf)
        room = max_cycles - cycles
        if t_stop < 9.0e18:
            room = min(room, (t_stop - t + empty_ns - 1) // empty_ns)
        stop = k >= room
        if stop:
            k = room
        n_class[0] += k
        cycles += k
        t += k * empty_ns
        if k % 2 == 1:
            s = 1 - s
        i += 1
        if stop:
            break
        # a cycle with at least one own click: pick the pair, then reuse the
        # channel uniforms conditioned on that choice
        c = aux[2 * i - 1]
        j = i - 1
        if c < c10:
            a1 = u1[j] * p1
            a2 = p2 + u2[j] * (1.0 - p2)
        elif c < c10 + c01:
            a1 = p1 + u1[j] * (1.0 - p1)
            a2 = u2[j] * p2
        else:
            a1 = u1[j] * p1
            a2 = u2[j] * p2
        k1, src1, w1 = _decide(a1, p1, p1, sh1, late)
        k2, src2, w2 = _decide(a2, p2, p2, sh2, late)
        k1, k2, src1, src2, seed = _backflash(k1, k2, src1, src2, w1, w2, bf)
        if seed != 0:
            n_bf += 1
        if k1 != KIND_NONE:
            n_dark += src1 == SRC_DARK
        if k2 != KIND_NONE:
            n_dark += src2 == SRC_DARK
        if record:
            t1, t2 = _event_times(
                float(t), k1, k2, seed, jt[2 * j], jt[2 * j + 1],
                prompt_off, prompt_jit, late_lo, late_hi, bf_jit,
            )
            first_two = k1 != KIND_NONE and k2 != KIND_NONE and t2 < t1
            if first_two:
                ev_t[ne] = t2
                ev_ch[ne] = 2
                ev_kind[ne] = k2
                ne += 1
            if k1 != KIND_NONE:
                ev_t[ne] = t1
                ev_ch[ne] = 1
                ev_kind[ne] = k1
                ne += 1
            if k2 != KIND_NONE and not first_two:
                ev_t[ne] = t2
                ev_ch[ne] = 2
                ev_kind[ne] = k2
                ne += 1
        cls = _classify(k1, k2)
        n_class[cls] += 1
        cycles += 1
        s, x, emitted, flip = _pp(s, x, cls)
        if emitted:
            n_flips += flip
            if nb < cap_bits:
                bits[nb] = x
            nb += 1
            total_bits += 1
            src = src1 if cls == 1 else src2
            n_dark_bits += src == SRC_DARK
            n_bf_bits += src == SRC_BACKFLASH
        t += click_ns if (cls == 1 or cls == 2 or cls == 3) else empty_ns

    fs[S_S] = s
    fs[S_X] = x
    ist[I_T] = t
    ist[I_CYCLES] = cycles
    ist[I_EMPTY] += n_class[0]
    ist[I_SINGLE] += n_class[1] + n_class[2]
    ist[I_BOTH] += n_class[3]
    ist[I_LATE] += n_class[4]
    ist[I_BITS] = total_bits
    ist[I_DARK_BITS] += n_dark_bits
    ist[I_BF_BITS] += n_bf_bits
    ist[I_BF_CLICKS] += n_bf
    ist[I_DARK_CLICKS] += n_dark
    ist[I_FLIPS] += n_flips
    return i, nb, ne
