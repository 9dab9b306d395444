"""The generator as a whole: timing rules, bias-controlled efficiency and the rate loop."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import engine as E
from .analysis import EventLog
from .bitstream import BitStream, BitWriter
from .physics import DetectorParams, OpticalParams, click_prob, dark_rate, dark_share

log = logging.getLogger(__name__)

_T_FOREVER = np.int64(1) << 62


@dataclass(frozen=True)
class TimingParams:
    pulse_ns: int = 12
    empty_delay_ns: int = 50
    click_delay_ns: int = 150

    def __post_init__(self):
        if min(self.pulse_ns, self.empty_delay_ns, self.click_delay_ns) <= 0:
            raise ValueError("delays must be positive")
        if self.click_delay_ns < self.empty_delay_ns:
            raise ValueError("click_delay_ns must be >= empty_delay_ns")


@dataclass(frozen=True)
class EfficiencyCurve:
    eta_max: float = 0.7
    v_half: float = 25.0
    width: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eta_max <= 1.0:
            raise ValueError("eta_max must lie in (0, 1]")
        if self.width <= 0:
            raise ValueError("width must be positive")


# Integrator gain giving a closed-loop natural frequency near 10 Hz at the default
# operating point (damping ~0.08); see loop_parameters().
DEFAULT_GAIN = 6.6e-4


@dataclass(frozen=True)
class FeedbackParams:
    counter_window: float = 1e-3
    integrator_gain: float = DEFAULT_GAIN  # V per counted event of error
    ssc_time_constant: float = 0.1
    v_min: float = 20.0
    v_max: float = 30.0

    def __post_init__(self):
        if self.ssc_time_constant <= 0:
            raise ValueError("ssc_time_constant must be positive")
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be below v_max")
        if self.counter_window <= 0:
            raise ValueError("counter_window must be positive")


@dataclass(frozen=True)
class DeviceConfig:
    optics: OpticalParams = field(default_factory=lambda: OpticalParams(mean_photons_per_pulse_ch1=1.2, mean_photons_per_pulse_ch2=1.2))
    detectors: DetectorParams = field(default_factory=DetectorParams)
    timing: TimingParams = field(default_factory=TimingParams)
    target_rate: float = 4e6
    feedback: FeedbackParams = field(default_factory=FeedbackParams)
    temperature: float = 25.0
    efficiency_curve: EfficiencyCurve = field(default_factory=EfficiencyCurve)
    feedback_enabled: bool = True
    v_bias_initial: float = 24.0
    # bypass optics and the bias curve with fixed per-cycle click probabilities
    click_probs: tuple | None = None
    modulation_depth: float = 0.0
    modulation_freq: float = 0.0
    counter_counts_any_prompt: bool = False

    def __post_init__(self):
        if self.target_rate <= 0:
            raise ValueError("target_rate must be positive")
        if self.click_probs is not None:
            p1, p2 = self.click_probs
            if not (0.0 <= p1 < 1.0 and 0.0 <= p2 < 1.0):
                raise ValueError("click_probs must lie in [0, 1)")
        if not 0.0 <= self.modulation_depth <= 1.0:
            raise ValueError("modulation_depth must lie in [0, 1]")

    def replace(self, **changes) -> "DeviceConfig":
        return dataclasses.replace(self, **changes)


def efficiency_curve(v_bias: float, curve: EfficiencyCurve) -> float:
    """Logistic detection efficiency eta_max / (1 + exp(-(v - v_half) / width))."""
    z = -(np.asarray(v_bias, dtype=float) - curve.v_half) / curve.width
    eta = curve.eta_max / (1.0 + np.exp(z))
    return float(eta) if eta.ndim == 0 else eta


def channel_probs(config: DeviceConfig, v_bias: float) -> tuple[float, float]:
    """Per-cycle click probabilities of both detectors at a bias voltage."""
    if config.click_probs is not None:
        return tuple(config.click_probs)
    eta = efficiency_curve(v_bias, config.efficiency_curve)
    det = config.detectors
    d = dark_rate(config.temperature, det)
    w = det.detection_window
    p1 = click_prob(config.optics.mean_photons_per_pulse_ch1, eta * det.efficiency_ch1, d, w)
    p2 = click_prob(config.optics.mean_photons_per_pulse_ch2, eta * det.efficiency_ch2, d, w)
    return p1, p2


def single_click_rate(p1: float, p2: float, timing: TimingParams = TimingParams(), late_click_prob: float = 0.0) -> float:
    """Steady-state rate (Hz) of cycles with exactly one valid click.

    Late clicks are invalid and do not extend the cycle, so only the prompt part
    ``p * (1 - late_click_prob)`` of each click probability counts.
    """
    if not (0.0 <= p1 < 1.0 and 0.0 <= p2 < 1.0):
        raise ValueError("click probabilities must lie in [0, 1)")
    a = p1 * (1.0 - late_click_prob)
    b = p2 * (1.0 - late_click_prob)
    singles = a * (1.0 - b) + b * (1.0 - a)
    p_any = 1.0 - (1.0 - a) * (1.0 - b)
    mean_ns = p_any * timing.click_delay_ns + (1.0 - p_any) * timing.empty_delay_ns
    return singles / (mean_ns * 1e-9)


def device_rate(config: DeviceConfig, v_bias: float) -> float:
    p1, p2 = channel_probs(config, v_bias)
    return single_click_rate(p1, p2, config.timing, config.detectors.late_click_prob)


# --- feedback loop ---------------------------------------------------------------

@dataclass(frozen=True)
class FeedbackState:
    integrator_value: float
    v_bias: float
    window_count: float = 0.0
    window_elapsed: float = 0.0  # s


def feedback_step(
    state: FeedbackState,
    params: FeedbackParams,
    valid_single_event,
    dt: float,
    target_rate: float = 4e6,
) -> FeedbackState:
    """Advance the counter / integrator / supply chain by ``dt`` seconds.

    ``valid_single_event`` is a bool for one cycle, or an expected event count for
    mean-field use.  The same update runs inside the compiled engine.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    count = state.window_count + float(valid_single_event)
    elapsed = state.window_elapsed + dt
    lag = -math.expm1(-dt / params.ssc_time_constant)
    v = state.v_bias + (state.integrator_value - state.v_bias) * lag
    v = min(max(v, params.v_min), params.v_max)
    integ = state.integrator_value
    w = params.counter_window
    if elapsed >= w * (1.0 - 1e-9):
        # fixed-period gate: the cycle that straddles the boundary is counted here and
        # its overshoot is carried into the next window
        error = count / w - target_rate
        integ = min(max(integ - params.integrator_gain * error * w, params.v_min), params.v_max)
        count = 0.0
        elapsed -= w
    return FeedbackState(integ, v, count, elapsed)


def simulate_loop_mean_field(config: DeviceConfig, duration: float, v0: float | None = None, rate_scale: float = 1.0):
    """Noise-free loop: every window counts exactly its expected number of singles.

    Returns ``(t, v_bias, v_control)`` sampled once per counter window.  ``rate_scale``
    multiplies the plant rate, e.g. to apply a step disturbance.
    """
    fb = config.feedback
    v0 = config.v_bias_initial if v0 is None else v0
    st = FeedbackState(v0, v0)
    n = int(round(duration / fb.counter_window))
    t = np.arange(1, n + 1) * fb.counter_window
    vb = np.empty(n)
    vc = np.empty(n)
    scale = np.broadcast_to(np.asarray(rate_scale, dtype=float), (n,))
    for i in range(n):
        expected = device_rate(config, st.v_bias) * scale[i] * fb.counter_window
        st = feedback_step(st, fb, expected, fb.counter_window, config.target_rate)
        vb[i] = st.v_bias
        vc[i] = st.integrator_value
    return t, vb, vc


def loop_parameters(config: DeviceConfig, v_eq: float | None = None) -> dict:
    """Linearised loop around the stable equilibrium: natural frequency and damping.

    The loop is integrator (gain g) into a first-order supply (tau) into the plant slope
    k = d rate / d v, i.e. tau s^2 + s + g k = 0.
    """
    if v_eq is None:
        eq = equilibrium_map(config, np.linspace(config.feedback.v_min, config.feedback.v_max, 2001))
        stable = [p for p in eq.crossings if p.stable]
        if not stable:
            raise ValueError("no stable equilibrium in the bias range")
        v_eq = stable[0].v_bias
    h = 1e-4
    k = (device_rate(config, v_eq + h) - device_rate(config, v_eq - h)) / (2 * h)
    g = config.feedback.integrator_gain
    tau = config.feedback.ssc_time_constant
    gk = g * k
    wn = math.sqrt(gk / tau) if gk > 0 else 0.0
    zeta = 1.0 / (2.0 * math.sqrt(gk * tau)) if gk > 0 else math.inf
    return {"v_eq": v_eq, "slope_hz_per_v": k, "natural_freq_hz": wn / (2 * math.pi), "damping": zeta}


# --- equilibria -------------------------------------------------------------------

@dataclass(frozen=True)
class EquilibriumPoint:
    v_bias: float
    single_rate: float
    slope_sign: int
    stable: bool


@dataclass(frozen=True)
class EquilibriumMap:
    points: list
    crossings: list
    v_peak: float
    max_rate: float
    lock_risk: bool
    lock_voltage: float | None


def equilibrium_map(config: DeviceConfig, v_grid) -> EquilibriumMap:
    """Rate along a bias grid, its maximum, and the rate == target crossings.

    A crossing on the rising branch is stable; on the falling branch the loop feedback
    changes sign and the bias runs away to ``v_max``.
    """
    v = np.asarray(v_grid, dtype=float)
    if v.size == 0:
        raise ValueError("empty bias grid")
    v = np.sort(v)
    rates = np.array([device_rate(config, x) for x in v])
    slope = np.sign(np.gradient(rates, v)) if v.size > 1 else np.zeros(1)
    points = [EquilibriumPoint(float(a), float(r), int(s), bool(s > 0)) for a, r, s in zip(v, rates, slope)]
    i_peak = int(np.argmax(rates))
    target = config.target_rate
    crossings = []
    diff = rates - target
    for i in range(v.size - 1):
        if diff[i] == 0 or diff[i] * diff[i + 1] < 0:
            # linear interpolation inside the grid cell
            frac = 0.0 if diff[i] == 0 else diff[i] / (diff[i] - diff[i + 1])
            vc = v[i] + frac * (v[i + 1] - v[i])
            rising = rates[i + 1] > rates[i]
            crossings.append(EquilibriumPoint(float(vc), target, 1 if rising else -1, bool(rising)))
    max_rate = float(rates[i_peak])
    only_falling = bool(crossings) and not any(c.stable for c in crossings)
    lock_risk = target > max_rate or only_falling
    return EquilibriumMap(
        points=points,
        crossings=crossings,
        v_peak=float(v[i_peak]),
        max_rate=max_rate,
        lock_risk=bool(lock_risk),
        lock_voltage=config.feedback.v_max if lock_risk else None,
    )


# --- backflash bookkeeping ------------------------------------------------------------

def _prob_abs_diff_within(x_lo, x_hi, y_lo, y_hi, w):
    """P(|X - Y| <= w) for independent uniforms X ~ U[x_lo, x_hi), Y ~ U[y_lo, y_hi)."""
    def cdf_x(t):
        if x_hi == x_lo:
            return 1.0 if t >= x_lo else 0.0
        return min(max((t - x_lo) / (x_hi - x_lo), 0.0), 1.0)

    if y_hi == y_lo:
        return cdf_x(y_lo + w) - cdf_x(y_lo - w)
    f = lambda y: cdf_x(y + w) - cdf_x(y - w)
    pts = sorted({x_lo - w, x_lo + w, x_hi - w, x_hi + w})
    pts = [p for p in pts if y_lo < p < y_hi]
    val, _ = integrate.quad(f, y_lo, y_hi, points=pts or None, limit=200)
    return val / (y_hi - y_lo)


def expected_coincidence_fraction(config: DeviceConfig, backflash_prob: float, window_ns: float = 20.0, v_bias: float | None = None) -> float:
    """Expected cross-channel pairs within +-window per recorded click, by enumeration.

    Counts same-cycle pairs only; a pair spanning two cycles needs a late click followed
    within ``window_ns`` by the next prompt click and is neglected.
    """
    det = config.detectors
    p1, p2 = channel_probs(config, config.v_bias_initial if v_bias is None else v_bias)
    late = det.late_click_prob
    pr = 1.0 - late
    p_lo, p_hi = det.prompt_offset_ns, det.prompt_offset_ns + det.prompt_jitter_ns
    l_lo, l_hi = det.late_offset_ns
    q_pp = _prob_abs_diff_within(p_lo, p_hi, p_lo, p_hi, window_ns)
    q_pl = _prob_abs_diff_within(l_lo, l_hi, p_lo, p_hi, window_ns)
    q_ll = _prob_abs_diff_within(l_lo, l_hi, l_lo, l_hi, window_ns)
    q_bf = min(1.0, window_ns / det.backflash_jitter_ns) if det.backflash_jitter_ns > 0 else 1.0
    seeded = p1 * pr * (1.0 - p2) + p2 * pr * (1.0 - p1)
    clicks = p1 + p2 + backflash_prob * seeded
    both = p1 * p2 * (pr * pr * q_pp + 2.0 * pr * late * q_pl + late * late * q_ll)
    pairs = both + backflash_prob * seeded * q_bf
    return pairs / clicks if clicks > 0 else 0.0


def calibrate_backflash(config: DeviceConfig, target_fraction: float = 500 / 7.1e6, window_ns: float = 20.0, grid=None) -> float:
    """Backflash probability whose expected coincidence fraction equals the target.

    Scans a log grid for the bracketing cell, then refines with Brent's method.
    """
    grid = np.logspace(-7, -1, 61) if grid is None else np.asarray(grid)
    vals = np.array([expected_coincidence_fraction(config, b, window_ns) for b in grid])
    base = expected_coincidence_fraction(config, 0.0, window_ns)
    if base >= target_fraction:
        raise ValueError("accidental coincidences alone exceed the target fraction")
    idx = np.nonzero(vals >= target_fraction)[0]
    if idx.size == 0:
        raise ValueError("target fraction not reachable on the backflash grid")
    hi = grid[idx[0]]
    lo = grid[idx[0] - 1] if idx[0] > 0 else 0.0
    return optimize.brentq(lambda b: expected_coincidence_fraction(config, b, window_ns) - target_fraction, lo, hi, xtol=1e-14)


# --- simulation --------------------------------------------------------------------

@dataclass(frozen=True)
class FeedbackTrace:
    t_s: np.ndarray
    v_bias: np.ndarray
    v_control: np.ndarray

    def __len__(self):
        return self.t_s.size


@dataclass(frozen=True)
class SimOutput:
    bits: BitStream
    events: EventLog
    feedback_trace: FeedbackTrace
    counters: dict
    elapsed_ns: int
    cycle_kinds: tuple | None = None  # (det1, det2) kind codes per cycle when requested

    @property
    def elapsed_s(self) -> float:
        return self.elapsed_ns * 1e-9

    @property
    def bit_rate(self) -> float:
        return self.counters["emitted_bits"] / self.elapsed_s if self.elapsed_ns else 0.0


def _param_vector(config: DeviceConfig, fixed: tuple | None) -> np.ndarray:
    det = config.detectors
    fb = config.feedback
    prm = np.zeros(E.N_PARAMS)
    d = dark_rate(config.temperature, det)
    prm[E.P_DARK_LAMBDA] = d * det.detection_window
    prm[E.P_MU1] = config.optics.mean_photons_per_pulse_ch1
    prm[E.P_MU2] = config.optics.mean_photons_per_pulse_ch2
    prm[E.P_EFF1] = det.efficiency_ch1
    prm[E.P_EFF2] = det.efficiency_ch2
    prm[E.P_LATE] = det.late_click_prob
    prm[E.P_BACKFLASH] = det.backflash_prob
    prm[E.P_AP_PROB] = det.afterpulse_prob
    prm[E.P_AP_DECAY_NS] = det.afterpulse_decay * 1e9
    prm[E.P_WINDOW_NS] = det.detection_window * 1e9
    prm[E.P_ETA_MAX] = config.efficiency_curve.eta_max
    prm[E.P_V_HALF] = config.efficiency_curve.v_half
    prm[E.P_V_WIDTH] = config.efficiency_curve.width
    prm[E.P_MOD_DEPTH] = config.modulation_depth
    prm[E.P_MOD_FREQ] = config.modulation_freq
    prm[E.P_FEEDBACK_ON] = float(config.feedback_enabled)
    prm[E.P_COUNTER_WINDOW_NS] = fb.counter_window * 1e9
    prm[E.P_GAIN] = fb.integrator_gain
    prm[E.P_TAU_NS] = fb.ssc_time_constant * 1e9
    prm[E.P_V_MIN] = fb.v_min
    prm[E.P_V_MAX] = fb.v_max
    prm[E.P_TARGET_HZ] = config.target_rate
    prm[E.P_COUNT_ANY] = float(config.counter_counts_any_prompt)
    prm[E.P_PROMPT_OFF] = det.prompt_offset_ns
    prm[E.P_PROMPT_JIT] = det.prompt_jitter_ns
    prm[E.P_LATE_LO], prm[E.P_LATE_HI] = det.late_offset_ns
    prm[E.P_BF_JIT] = det.backflash_jitter_ns
    prm[E.P_EMPTY_NS] = config.timing.empty_delay_ns
    prm[E.P_CLICK_NS] = config.timing.click_delay_ns
    if fixed is not None:
        prm[E.P_MODE_FIXED] = 1.0
        prm[E.P_P1], prm[E.P_P2], prm[E.P_SHARE1], prm[E.P_SHARE2] = fixed
    return prm


def _fixed_probs(config: DeviceConfig, v_bias: float):
    """Constant (p1, p2, dark share 1, dark share 2), or None when they vary per cycle."""
    if config.click_probs is not None:
        p1, p2 = config.click_probs
        return float(p1), float(p2), 0.0, 0.0
    if config.feedback_enabled or config.modulation_depth > 0:
        return None
    det = config.detectors
    eta = efficiency_curve(v_bias, config.efficiency_curve)
    d = dark_rate(config.temperature, det)
    w = det.detection_window
    mu1 = config.optics.mean_photons_per_pulse_ch1
    mu2 = config.optics.mean_photons_per_pulse_ch2
    return (
        click_prob(mu1, eta * det.efficiency_ch1, d, w),
        click_prob(mu2, eta * det.efficiency_ch2, d, w),
        dark_share(mu1, eta * det.efficiency_ch1, d, w),
        dark_share(mu2, eta * det.efficiency_ch2, d, w),
    )


def _counters(ist: np.ndarray) -> dict:
    return {
        "cycles": int(ist[E.I_CYCLES]),
        "empty": int(ist[E.I_EMPTY]),
        "single": int(ist[E.I_SINGLE]),
        "both": int(ist[E.I_BOTH]),
        "late": int(ist[E.I_LATE]),
        "emitted_bits": int(ist[E.I_BITS]),
        "flips": int(ist[E.I_FLIPS]),
        "dark_originated_bits": int(ist[E.I_DARK_BITS]),
        "backflash_originated_bits": int(ist[E.I_BF_BITS]),
        "backflash_clicks": int(ist[E.I_BF_CLICKS]),
        "afterpulse_clicks": int(ist[E.I_AP_CLICKS]),
        "dark_clicks": int(ist[E.I_DARK_CLICKS]),
    }


def run_simulation(
    config: DeviceConfig,
    seed: int,
    n_cycles: int | None = None,
    n_bits: int | None = None,
    seconds: float | None = None,
    *,
    record_events: bool = True,
    record_cycles: bool = False,
    engine: str = "auto",
    initial_state: tuple[int, int] = (0, 0),
    chunk: int = 1 << 20,
) -> SimOutput:
    """Simulate the generator cycle by cycle.

    Exactly one of ``n_cycles``, ``n_bits`` or ``seconds`` sets the run length.  The
    result is a deterministic function of ``(config, seed, length, engine)``; event
    recording draws from its own stream and never changes the bits.
    """
    given = [x is not None for x in (n_cycles, n_bits, seconds)]
    if sum(given) != 1:
        raise ValueError("give exactly one of n_cycles, n_bits, seconds")
    max_cycles = np.int64(n_cycles) if n_cycles is not None else _T_FOREVER
    max_bits = np.int64(n_bits) if n_bits is not None else _T_FOREVER
    t_stop = np.int64(round(seconds * 1e9)) if seconds is not None else _T_FOREVER
    if min(max_cycles, max_bits, t_stop) < 0:
        raise ValueError("run length must be non-negative")

    fixed = _fixed_probs(config, config.v_bias_initial)
    if engine == "auto":
        sparse_ok = fixed is not None and config.detectors.afterpulse_prob == 0
        engine = "sparse" if sparse_ok and (1 - (1 - fixed[0]) * (1 - fixed[1])) < 0.05 else "dense"
    if engine == "sparse" and (fixed is None or config.detectors.afterpulse_prob > 0):
        raise ValueError("the sparse engine needs constant click probabilities and no afterpulsing")
    if engine == "sparse" and record_cycles:
        raise ValueError("record_cycles is only available with the dense engine")
    prm = _param_vector(config, fixed)

    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)
    g1, g2, g3 = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(3))

    fs = np.zeros(E.N_FSTATE)
    fs[E.S_S], fs[E.S_X] = initial_state
    fs[E.S_INTEG] = fs[E.S_V] = config.v_bias_initial
    ist = np.zeros(E.N_ISTATE, dtype=np.int64)

    writer = BitWriter()
    ev_parts, tr_parts, cyc_parts = [], [], []
    empty_f = np.zeros(0)
    empty_u8 = np.zeros(0, dtype=np.uint8)
    # fewest cycles a counter window can hold: every cycle at the long delay
    per_window = max(1, int(prm[E.P_COUNTER_WINDOW_NS] // prm[E.P_CLICK_NS]))

    while ist[E.I_CYCLES] < max_cycles and ist[E.I_BITS] < max_bits and ist[E.I_T] < t_stop:
        if engine == "dense":
            m = int(min(chunk, max_cycles - ist[E.I_CYCLES]))
        else:
            m = chunk
        u1 = g1.random(m)
        u2 = g2.random(m)
        aux = g3.random(2 * m) if engine == "sparse" else empty_f
        jt = g3.random(2 * m) if record_events else empty_f
        bits = np.empty(m, dtype=np.uint8)
        n_ev_cap = 2 * m if record_events else 0
        ev_t = np.empty(n_ev_cap)
        ev_ch = np.empty(n_ev_cap, dtype=np.uint8)
        ev_kind = np.empty(n_ev_cap, dtype=np.uint8)
        if engine == "dense":
            n_tr_cap = m // per_window + 2 if config.feedback_enabled else 0
            tr_t, tr_v, tr_c = np.empty(n_tr_cap), np.empty(n_tr_cap), np.empty(n_tr_cap)
            ck1 = np.empty(m if record_cycles else 0, dtype=np.uint8)
            ck2 = np.empty(m if record_cycles else 0, dtype=np.uint8)
            used, nb, ne, ntr = E.dense_kernel(
                prm, fs, ist, u1, u2, jt, record_events, max_bits, t_stop,
                bits, ev_t, ev_ch, ev_kind, tr_t, tr_v, tr_c, ck1, ck2,
            )
            if ntr:
                tr_parts.append((tr_t[:ntr].copy(), tr_v[:ntr].copy(), tr_c[:ntr].copy()))
            if record_cycles:
                cyc_parts.append((ck1[:used].copy(), ck2[:used].copy()))
        else:
            used, nb, ne = E.sparse_kernel(
                prm, fs, ist, aux, u1, u2, jt, record_events, max_bits, max_cycles, t_stop,
                bits, ev_t, ev_ch, ev_kind,
            )
        writer.extend(bits[:nb])
        if ne:
            ev_parts.append((ev_t[:ne].copy(), ev_ch[:ne].copy(), ev_kind[:ne].copy()))
        if used == 0:
            break

    if ev_parts:
        events = EventLog(*(np.concatenate(x) for x in zip(*ev_parts)))
    else:
        events = EventLog.empty()
    if tr_parts:
        trace = FeedbackTrace(*(np.concatenate(x) for x in zip(*tr_parts)))
    else:
        trace = FeedbackTrace(empty_f, empty_f, empty_f)
    cycle_kinds = None
    if record_cycles:
        cycle_kinds = tuple(np.concatenate(x) if x else empty_u8 for x in zip(*cyc_parts)) if cyc_parts else (empty_u8, empty_u8)
    out = SimOutput(
        bits=writer.getvalue(),
        events=events,
        feedback_trace=trace,
        counters=_counters(ist),
        elapsed_ns=int(ist[E.I_T]),
        cycle_kinds=cycle_kinds,
    )
    log.debug("simulation done: %s", out.counters)
    return out
