"""Physical randomness model: optics, detector noise and per-cycle click sampling.

All times inside the simulator are nanoseconds unless a name says otherwise.
Rates are in Hz and probabilities are per cycle.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

SPEED_OF_LIGHT = 299_792_458.0  # m/s

T_MIN_C = -40.0
T_MAX_C = 100.0

# Dark-rate defaults: 500 Hz per detector at 70 C, doubling every 8 C.
_DARK_EXPONENT = math.log(2.0) / 8.0
_DARK_AMPLITUDE = 500.0 * 2.0 ** (-70.0 / 8.0)


class Kind(enum.IntEnum):
    NONE = 0
    PROMPT = 1
    LATE = 2


@dataclass(frozen=True)
class OpticalParams:
    center_wavelength: float = 820e-9
    half_bandwidth: float = 20e-9
    mean_photons_per_pulse_ch1: float = 1.0
    mean_photons_per_pulse_ch2: float = 1.0

    def __post_init__(self):
        if not (self.center_wavelength > 0 and self.half_bandwidth > 0):
            raise ValueError("wavelengths must be strictly positive")
        if self.half_bandwidth >= self.center_wavelength:
            raise ValueError("half_bandwidth must be smaller than center_wavelength")
        if self.mean_photons_per_pulse_ch1 < 0 or self.mean_photons_per_pulse_ch2 < 0:
            raise ValueError("mean photon numbers must be non-negative")


@dataclass(frozen=True)
class DetectorParams:
    efficiency_ch1: float = 1.0
    efficiency_ch2: float = 1.0
    dark_rate_amplitude: float = _DARK_AMPLITUDE
    dark_rate_exponent: float = _DARK_EXPONENT
    late_click_prob: float = 0.02
    backflash_prob: float = 0.0
    afterpulse_prob: float = 0.0
    afterpulse_decay: float = 100e-9
    detection_window: float = 25e-9
    # click timing inside a cycle, ns after the cycle start
    prompt_offset_ns: float = 10.0
    prompt_jitter_ns: float = 4.0
    late_offset_ns: tuple = field(default=(25.0, 45.0))
    backflash_jitter_ns: float = 4.0

    def __post_init__(self):
        for name in ("efficiency_ch1", "efficiency_ch2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("late_click_prob", "backflash_prob", "afterpulse_prob"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if self.dark_rate_amplitude < 0:
            raise ValueError("dark_rate_amplitude must be >= 0")
        if self.detection_window <= 0:
            raise ValueError("detection_window must be > 0")
        if self.afterpulse_decay <= 0:
            raise ValueError("afterpulse_decay must be > 0")
        lo, hi = self.late_offset_ns
        if not 0 <= lo <= hi:
            raise ValueError("late_offset_ns must be an ordered (lo, hi) pair")


@dataclass(frozen=True)
class CycleOutcome:
    t_start: int
    det1: Kind
    det2: Kind
    cycle_duration: int

    @property
    def both_prompt(self) -> bool:
        return self.det1 == Kind.PROMPT and self.det2 == Kind.PROMPT


def coherence_time(optics: OpticalParams) -> float:
    """Coherence time in seconds, lambda^2 / (2 pi c dlambda)."""
    lam = optics.center_wavelength
    dlam = optics.half_bandwidth
    if not (lam > 0 and 0 < dlam < lam):
        raise ValueError("invalid optical parameters")
    return lam * lam / (2.0 * math.pi * SPEED_OF_LIGHT * dlam)


def dark_rate(temperature: float, params: DetectorParams) -> float:
    """Dark count rate of one detector in Hz; temperature is clamped to the model range."""
    t = min(max(float(temperature), T_MIN_C), T_MAX_C)
    return params.dark_rate_amplitude * math.exp(params.dark_rate_exponent * t)


def click_prob(mean_photons: float, efficiency: float, dark: float, window: float) -> float:
    """Poisson click probability 1 - exp(-(mu*eta + dark*window))."""
    if mean_photons < 0 or dark < 0 or window < 0:
        raise ValueError("inputs must be non-negative")
    if not 0.0 <= efficiency <= 1.0:
        raise ValueError("efficiency must lie in [0, 1]")
    return -math.expm1(-(mean_photons * efficiency + dark * window))


def dark_share(mean_photons: float, efficiency: float, dark: float, window: float) -> float:
    """Fraction of clicks attributed to dark counts (first-arrival attribution)."""
    light = mean_photons * efficiency
    noise = dark * window
    total = light + noise
    return noise / total if total > 0 else 0.0


@dataclass
class AfterpulseState:
    """Pending afterpulse charge per channel (expected number of afterpulses still to come)."""

    pending1: float = 0.0
    pending2: float = 0.0


def sample_cycle(
    rng: np.random.Generator,
    p1: float,
    p2: float,
    params: DetectorParams,
    afterpulse: AfterpulseState | None = None,
    t_start: int = 0,
    click_delay_ns: int = 150,
    empty_delay_ns: int = 50,
) -> CycleOutcome:
    """Draw one cycle for both detectors.

    Scalar reference for the compiled engine in :mod:`qrngsim.engine`; it uses the same
    decision rules but its own random draws, so only distributions can be compared.
    """
    if not (0.0 <= p1 < 1.0 and 0.0 <= p2 < 1.0):
        raise ValueError("click probabilities must lie in [0, 1)")
    a1 = a2 = 0.0
    if afterpulse is not None and params.afterpulse_prob > 0:
        exposure = -math.expm1(-params.detection_window / params.afterpulse_decay)
        a1 = -math.expm1(-afterpulse.pending1 * exposure)
        a2 = -math.expm1(-afterpulse.pending2 * exposure)
    q1 = 1.0 - (1.0 - p1) * (1.0 - a1)
    q2 = 1.0 - (1.0 - p2) * (1.0 - a2)

    u1, u2, l1, l2, b = rng.random(5)
    k1 = Kind.NONE
    k2 = Kind.NONE
    if u1 < q1:
        k1 = Kind.LATE if l1 < params.late_click_prob else Kind.PROMPT
    if u2 < q2:
        k2 = Kind.LATE if l2 < params.late_click_prob else Kind.PROMPT
    if k1 == Kind.PROMPT and k2 == Kind.NONE and b < params.backflash_prob:
        k2 = Kind.PROMPT
    elif k2 == Kind.PROMPT and k1 == Kind.NONE and b < params.backflash_prob:
        k1 = Kind.PROMPT

    dur = click_delay_ns if Kind.PROMPT in (k1, k2) else empty_delay_ns
    if afterpulse is not None and params.afterpulse_prob > 0:
        decay = math.exp(-dur * 1e-9 / params.afterpulse_decay)
        afterpulse.pending1 *= decay
        afterpulse.pending2 *= decay
        if k1 != Kind.NONE:
            afterpulse.pending1 += params.afterpulse_prob
        if k2 != Kind.NONE:
            afterpulse.pending2 += params.afterpulse_prob
    return CycleOutcome(t_start=t_start, det1=k1, det2=k2, cycle_duration=dur)


@njit(cache=True)
def _apply_deadtime(times, deadtime):
    keep = np.empty(times.shape[0], dtype=np.bool_)
    last = -np.inf
    for i in range(times.shape[0]):
        if times[i] - last >= deadtime:
            keep[i] = True
            last = times[i]
        else:
            keep[i] = False
    return keep


def cw_click_train(
    rate_hz: float,
    duration_s: float,
    rng: np.random.Generator,
    deadtime_ns: float = 0.0,
    modulation_depth: float = 0.0,
    modulation_freq_hz: float = 0.0,
) -> np.ndarray:
    """Click times (ns, sorted) of one detector under continuous illumination.

    Arrivals are Poisson with rate ``rate_hz * (1 + depth*sin(2 pi f t + phi))`` (random
    phase, thinning), followed by a non-paralyzable dead time.
    """
    if rate_hz < 0 or duration_s < 0:
        raise ValueError("rate and duration must be non-negative")
    if not 0.0 <= modulation_depth <= 1.0:
        raise ValueError("modulation_depth must lie in [0, 1]")
    duration_ns = duration_s * 1e9
    peak = rate_hz * (1.0 + modulation_depth)
    n = rng.poisson(peak * duration_s)
    t = np.sort(rng.random(n) * duration_ns)
    if modulation_depth > 0:
        phase = rng.random() * 2 * np.pi
        accept = (1.0 + modulation_depth * np.sin(2 * np.pi * modulation_freq_hz * t * 1e-9 + phase)) / (
            1.0 + modulation_depth
        )
        t = t[rng.random(n) < accept]
    if deadtime_ns > 0:
        t = t[_apply_deadtime(t, deadtime_ns)]
    return t
