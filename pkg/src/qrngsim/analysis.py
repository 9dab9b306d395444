"""Correlation histograms, fit residuals, coincidence counting and spectra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, stats

from .bitstream import BitStream, StreamStats, bit_stats, sigma_threshold  # noqa: F401

KIND_NAMES = {1: "prompt", 2: "late"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}


@dataclass(frozen=True)
class EventLog:
    t: np.ndarray  # ns, non-decreasing
    channel: np.ndarray  # uint8, 1 or 2
    kind: np.ndarray  # uint8, 1 prompt / 2 late

    def __post_init__(self):
        if not (self.t.shape == self.channel.shape == self.kind.shape):
            raise ValueError("EventLog columns must have equal length")

    def __len__(self):
        return self.t.size

    @classmethod
    def empty(cls) -> "EventLog":
        return cls(np.zeros(0), np.zeros(0, dtype=np.uint8), np.zeros(0, dtype=np.uint8))

    @classmethod
    def from_channels(cls, t1, t2, kind=1) -> "EventLog":
        t = np.concatenate([np.asarray(t1, float), np.asarray(t2, float)])
        ch = np.concatenate([np.ones(len(t1), np.uint8), np.full(len(t2), 2, np.uint8)])
        order = np.argsort(t, kind="stable")
        return cls(t[order], ch[order], np.full(t.size, kind, np.uint8))

    def times(self, channel: int, kind: int | None = None) -> np.ndarray:
        m = self.channel == channel
        if kind is not None:
            m &= self.kind == kind
        return self.t[m]


@dataclass(frozen=True)
class Histogram:
    bin_width: float
    lo: float
    hi: float
    counts: np.ndarray
    total_events: int
    pairs_examined: int = 0
    out_of_range: int = 0

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.counts.size + 1)

    @property
    def bin_lo(self) -> np.ndarray:
        return self.edges[:-1]

    @property
    def centers(self) -> np.ndarray:
        return self.bin_lo + 0.5 * self.bin_width

    def merge(self, other: "Histogram") -> "Histogram":
        """Sum of two histograms over the same binning (e.g. from consecutive chunks)."""
        if (self.bin_width, self.lo, self.hi, self.counts.size) != (other.bin_width, other.lo, other.hi, other.counts.size):
            raise ValueError("histograms have different binning")
        return Histogram(
            self.bin_width, self.lo, self.hi, self.counts + other.counts,
            self.total_events + other.total_events,
            self.pairs_examined + other.pairs_examined,
            self.out_of_range + other.out_of_range,
        )

    def normalized(self) -> np.ndarray:
        """Counts as a probability density over lag (per ns)."""
        s = self.counts.sum()
        return self.counts / (s * self.bin_width) if s else np.zeros(self.counts.size)


def _bin(diffs: np.ndarray, lo: float, bin_width: float, nbins: int) -> np.ndarray:
    idx = np.floor((diffs - lo) / bin_width).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < nbins)]
    return np.bincount(idx, minlength=nbins)


def autocorr_hist(log: EventLog, channel: int, bin_width: float = 4.0, max_lag: float = 1000.0, adjacent_only: bool = False) -> Histogram:
    """Histogram of forward lags t_j - t_i <= max_lag between clicks of one channel.

    All ordered pairs are used unless ``adjacent_only`` (then it is the waiting-time
    distribution).
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    t = np.sort(log.times(channel))
    nbins = int(np.ceil(max_lag / bin_width))
    counts = np.zeros(nbins, dtype=np.int64)
    examined = 0
    in_range = 0
    k = 1
    while k < t.size:
        d = t[k:] - t[:-k]
        d = d[d <= max_lag]
        if d.size == 0:
            break
        examined += d.size
        c = _bin(d, 0.0, bin_width, nbins)
        in_range += int(c.sum())
        counts += c
        if adjacent_only:
            break
        k += 1
    return Histogram(bin_width, 0.0, nbins * bin_width, counts, len(t), examined, examined - in_range)


def _cross_pairs(t1: np.ndarray, t2: np.ndarray, window: float, chunk: int = 1 << 20):
    """Yield arrays of signed lags t2 - t1 with |lag| <= window."""
    lo_idx = np.searchsorted(t2, t1 - window, side="left")
    hi_idx = np.searchsorted(t2, t1 + window, side="right")
    for s in range(0, t1.size, chunk):
        a = lo_idx[s : s + chunk]
        b = hi_idx[s : s + chunk]
        n = b - a
        tot = int(n.sum())
        if tot == 0:
            continue
        rep = np.repeat(np.arange(a.size), n)
        offs = np.arange(tot) - np.repeat(np.cumsum(n) - n, n)
        yield t2[a[rep] + offs] - t1[s : s + chunk][rep]


def crosscorr_hist(log: EventLog, bin_width: float = 4.0, window: float = 400.0) -> Histogram:
    """Histogram of signed lags t2 - t1 over all channel-1/channel-2 pairs within +-window."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    t1 = np.sort(log.times(1))
    t2 = np.sort(log.times(2))
    nbins = int(np.ceil(window / bin_width))
    lo = -nbins * bin_width
    counts = np.zeros(2 * nbins, dtype=np.int64)
    examined = 0
    for lags in _cross_pairs(t1, t2, window):
        examined += lags.size
        counts += _bin(lags, lo, bin_width, 2 * nbins)
    return Histogram(bin_width, lo, -lo, counts, len(t1) + len(t2), examined, examined - int(counts.sum()))


def coincidence_count(log: EventLog, window: float = 20.0) -> int:
    t1 = np.sort(log.times(1))
    t2 = np.sort(log.times(2))
    lo = np.searchsorted(t2, t1 - window, side="left")
    hi = np.searchsorted(t2, t1 + window, side="right")
    return int((hi - lo).sum())


def coincidence_fraction(log: EventLog, window: float = 20.0) -> float:
    """Cross-channel pairs with |t2 - t1| <= window divided by all clicks of both channels."""
    n = len(log.times(1)) + len(log.times(2))
    return coincidence_count(log, window) / n if n else 0.0


@dataclass(frozen=True)
class PeakSignificance:
    peak: float
    baseline: float
    sigma: float

    @property
    def excess_sigmas(self) -> float:
        return (self.peak - self.baseline) / self.sigma


def zero_lag_peak(hist: Histogram, core: float = 8.0, exclude: float = 50.0) -> PeakSignificance:
    """Largest bin within +-core of zero lag against the mean of bins beyond +-exclude."""
    c = hist.centers
    core_counts = hist.counts[np.abs(c) < core]
    side = hist.counts[np.abs(c) > exclude]
    if core_counts.size == 0 or side.size == 0:
        raise ValueError("histogram does not cover both the core and the baseline region")
    base = float(side.mean())
    return PeakSignificance(float(core_counts.max()), base, float(np.sqrt(max(base, 1.0))))


@dataclass(frozen=True)
class FitResiduals:
    lags: np.ndarray
    residuals: np.ndarray  # (counts - fit) / fit
    slope: float  # of log counts per ns
    intercept: float
    peak_to_peak: float  # raw max - min of residuals
    oscillation_freq: float  # Hz, of the best sinusoid in the residuals
    oscillation_pp: float  # 2 x fitted sinusoid amplitude


def exp_fit_residuals(hist: Histogram, start: float = 150.0, min_bins: int = 10) -> FitResiduals:
    """Fit log counts beyond ``start`` with a line and return relative residuals.

    The fit is weighted by the counts (Poisson variance of log n ~ 1/n).  The residuals
    are also fitted with the single sinusoid that explains most of their variance, whose
    peak-to-peak is robust against bin noise.
    """
    c = hist.centers
    sel = (hist.bin_lo >= start) & (hist.counts > 0)
    if np.count_nonzero(sel) < min_bins:
        raise ValueError(f"need at least {min_bins} nonempty bins beyond {start} ns")
    x = c[sel]
    y = hist.counts[sel].astype(float)
    slope, intercept = np.polyfit(x, np.log(y), 1, w=np.sqrt(y))
    fit = np.exp(intercept + slope * x)
    res = (y - fit) / fit
    freq, pp = _dominant_sinusoid(x, res)
    return FitResiduals(x, res, float(slope), float(intercept), float(res.max() - res.min()), freq, pp)


def _dominant_sinusoid(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares sinusoid over a fine frequency grid; returns (Hz, peak-to-peak)."""
    span = x[-1] - x[0]
    if span <= 0 or x.size < 4:
        return 0.0, 0.0
    step = np.median(np.diff(x))
    f_max = 0.5 / step  # per ns
    freqs = np.linspace(0.5 / span, f_max, 8 * x.size)
    best = (0.0, 0.0, -1.0)
    yc = y - y.mean()
    for f in freqs:
        A = np.column_stack([np.sin(2 * np.pi * f * x), np.cos(2 * np.pi * f * x), np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, yc, rcond=None)
        amp = float(np.hypot(coef[0], coef[1]))
        explained = amp * amp
        if explained > best[2]:
            best = (f, amp, explained)
    return best[0] * 1e9, 2.0 * best[1]


@dataclass(frozen=True)
class FlatnessTest:
    chi2: float
    dof: int
    p_value: float
    min_bin_p: float
    n_bins: int
    alpha: float

    @property
    def passed(self) -> bool:
        return self.min_bin_p >= self.alpha / self.n_bins


def chi2_flatness(hist: Histogram, start: float | None = None, stop: float | None = None, alpha: float = 0.05) -> FlatnessTest:
    """Test bins in [start, stop) against a constant level.

    Each bin gets a two-sided Poisson p-value against the pooled mean and the test passes
    when the smallest one clears the Bonferroni threshold ``alpha / n_bins``.  The
    aggregate chi-square is reported alongside.
    """
    lo = hist.bin_lo
    sel = np.ones(lo.size, dtype=bool)
    if start is not None:
        sel &= lo >= start
    if stop is not None:
        sel &= lo + hist.bin_width <= stop
    k = hist.counts[sel].astype(float)
    if k.size < 2:
        raise ValueError("need at least two bins")
    mu = k.mean()
    if mu == 0:
        return FlatnessTest(0.0, k.size - 1, 1.0, 1.0, k.size, alpha)
    chi2 = float(((k - mu) ** 2 / mu).sum())
    p = float(stats.chi2.sf(chi2, k.size - 1))
    upper = stats.poisson.sf(k - 1, mu)
    lower = stats.poisson.cdf(k, mu)
    per_bin = np.minimum(1.0, 2.0 * np.minimum(upper, lower))
    return FlatnessTest(chi2, k.size - 1, p, float(per_bin.min()), k.size, alpha)


@dataclass(frozen=True)
class Spectrum:
    freq: np.ndarray  # Hz
    power: np.ndarray

    def peak(self, f_min: float = 0.0, f_max: float = np.inf) -> tuple[float, float]:
        m = (self.freq > f_min) & (self.freq <= f_max)
        if not m.any():
            raise ValueError("no frequencies in range")
        i = np.argmax(np.where(m, self.power, -np.inf))
        return float(self.freq[i]), float(self.power[i])


def periodogram(trace, sample_rate: float | None = None, t=None, rtol: float = 1e-6) -> Spectrum:
    """One-sided magnitude-squared spectrum of the mean-removed trace (no taper).

    Give either ``sample_rate`` or the sample times ``t``; times must be uniform.
    """
    x = np.asarray(trace, dtype=float)
    if x.size < 64:
        raise ValueError("periodogram needs at least 64 samples")
    if t is not None:
        t = np.asarray(t, dtype=float)
        dt = np.diff(t)
        if dt.size == 0 or np.any(np.abs(dt - dt.mean()) > rtol * abs(dt.mean()) + 1e-15):
            raise ValueError("trace is not uniformly sampled")
        fs = 1.0 / dt.mean()
        if sample_rate is not None and not np.isclose(fs, sample_rate, rtol=1e-6):
            raise ValueError("sample_rate disagrees with the sample times")
        sample_rate = fs
    if sample_rate is None or sample_rate <= 0:
        raise ValueError("a positive sample_rate is required")
    f, p = signal.periodogram(x, fs=sample_rate, window="boxcar", detrend="constant", scaling="spectrum")
    return Spectrum(f, p)


def resonance_peak(spec: Spectrum, f_max: float = 1000.0, smooth: int = 5) -> dict:
    """Locate the spectral maximum and decide whether it is a resonance.

    The spectrum is smoothed with a moving average of ``smooth`` bins.  A resonance is a
    maximum away from the lowest frequencies that stands at least 3x above the mean
    level of the band below a quarter of its frequency.
    """
    m = (spec.freq > 0) & (spec.freq <= f_max)
    f = spec.freq[m]
    p = spec.power[m]
    if f.size < 2 * smooth:
        raise ValueError("spectrum too short")
    ps = np.convolve(p, np.ones(smooth) / smooth, mode="same")
    i = int(np.argmax(ps))
    f_peak = float(f[i])
    low = ps[f <= f_peak / 4]
    ratio = float(ps[i] / low.mean()) if low.size else 1.0
    resonant = i >= 2 * smooth and ratio >= 3.0
    return {"freq_hz": f_peak, "power": float(ps[i]), "ratio_to_low_band": ratio, "resonant": bool(resonant)}


def step_overshoot(t: np.ndarray, y: np.ndarray, settle_from: float) -> float:
    """Overshoot of a step response as a fraction of the step size.

    The final value is the mean of ``y`` after ``settle_from``; the response is assumed
    to start at ``y[0]``.
    """
    final = float(np.mean(y[t >= settle_from]))
    step = final - float(y[0])
    if step == 0:
        return 0.0
    beyond = (y - final) * np.sign(step)
    return max(0.0, float(beyond.max()) / abs(step))
