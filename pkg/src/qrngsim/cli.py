"""``qrngsim`` command line: simulate, analyze, predict, validate, sweep.

Exit codes: 0 success, 1 validation or analysis failure, 2 usage error, 3 IO or parse
error.  The default output directory comes from ``$QRNGSIM_OUT`` (else the current one).
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from . import __version__
from . import analysis as A
from . import io as qio
from .bitstream import BitStream, StreamStats, bit_stats, sigma_threshold
from .config import ConfigError, RunConfig, config_hash, dump_config, load_config
from .device import (
    DeviceConfig,
    device_rate,
    equilibrium_map,
    expected_coincidence_fraction,
    run_simulation,
    single_click_rate,
)
from .physics import dark_rate
from .postproc import (
    estimate_mismatch,
    event_probs,
    flip_hold_bias,
    flip_hold_per_output,
    flip_hold_probs,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
ENV_OUT = "QRNGSIM_OUT"
N_SIGMA = 4.0


class UsageError(Exception):
    pass


def build_id() -> str:
    return f"qrngsim-{__version__} numpy-{np.__version__} numba-{numba.__version__} py-{platform.python_version()}"


# --- reports ------------------------------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


@dataclass
class Report:
    """Rows of (key, value, sigma multiple, status) rendered as a table and as key=value."""

    title: str
    rows: list = field(default_factory=list)

    def add(self, key, value, sigmas=None, status=None):
        self.rows.append((key, fmt(value), None if sigmas is None else f"{sigmas:.2f}", status))

    @property
    def failed(self) -> bool:
        return any(r[3] == "FAIL" for r in self.rows)

    def text(self) -> str:
        w = max([len(r[0]) for r in self.rows] + [8])
        wv = min(max([len(r[1]) for r in self.rows] + [5]), 14)
        lines = [self.title, f"{'key':<{w}}  {'value':>{wv}}  {'sigmas':>8}  status"]
        for k, v, s, st in self.rows:
            lines.append(f"{k:<{w}}  {v:>{wv}}  {s or '':>8}  {st or ''}".rstrip())
        return "\n".join(lines)

    def kv(self) -> str:
        out = []
        for k, v, s, st in self.rows:
            out.append(f"{k}={v}")
            if s is not None:
                out.append(f"{k}.sigmas={s}")
            if st is not None:
                out.append(f"{k}.status={st}")
        return "\n".join(out)


def emit(args, report: Report) -> None:
    if getattr(args, "kv_out", None):
        Path(args.kv_out).write_text(report.kv() + "\n")
    if getattr(args, "quiet", False):
        return
    print(report.text())
    print()
    print(report.kv())


def stats_rows(report: Report, st: StreamStats, prefix: str = "") -> None:
    lim = N_SIGMA
    sb, sf = st.balance_significance, st.flip_significance
    report.add(prefix + "n0", st.n0)
    report.add(prefix + "n1", st.n1)
    report.add(prefix + "rel_dev_balance", st.rel_dev_balance, sb, "PASS" if abs(sb) < lim else "FAIL")
    report.add(prefix + "n_hold", st.n_hold)
    report.add(prefix + "n_flip", st.n_flip)
    report.add(prefix + "rel_dev_flip", st.rel_dev_flip, sf, "PASS" if abs(sf) < lim else "FAIL")
    report.add(prefix + "sigma", st.sigma)


# --- helpers ------------------------------------------------------------------------------------------

def out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(ENV_OUT) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def parse_sets(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve_run(args) -> RunConfig:
    overrides = parse_sets(getattr(args, "set", None))
    for flag, key in (("seed", "run.seed"), ("bits", "run.bits"), ("cycles", "run.cycles"), ("seconds", "run.seconds")):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = str(v)
    if getattr(args, "engine", None):
        overrides["run.engine"] = args.engine
    if getattr(args, "no_events", False):
        overrides["run.record_events"] = "false"
    if getattr(args, "feedback", None) is not None:
        overrides["device.feedback_enabled"] = "true" if args.feedback else "false"
    if getattr(args, "afterpulse", None) is not None:
        overrides["detectors.afterpulse_prob"] = str(args.afterpulse)
    if getattr(args, "modulation", None) is not None:
        overrides["device.modulation_depth"] = str(args.modulation[0])
        overrides["device.modulation_freq"] = str(args.modulation[1])
    if getattr(args, "config", None):
        try:
            load_config(args.config)
        except OSError as exc:
            raise OSError(f"{args.config}: {exc.strerror}") from None
        except ConfigError as exc:
            raise qio.ParseError(args.config, "config", str(exc)) from None
    try:
        run = load_config(getattr(args, "config", None), overrides)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    # command-line length flags replace whatever length the file gave
    given = [f for f in ("bits", "cycles", "seconds") if getattr(args, f, None) is not None]
    if given:
        keep = {"bits": "n_bits", "cycles": "n_cycles", "seconds": "seconds"}[given[-1]]
        run = run.replace(**{v: (getattr(run, v) if v == keep else None) for v in ("n_bits", "n_cycles", "seconds")})
    return run


# --- simulate ------------------------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    run = resolve_run(args)
    if run.seed is None:
        raise UsageError("a seed is required (--seed or run.seed); there is no clock-based default")
    try:
        length = run.length()
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    sim = run_simulation(run.device, run.seed, **length, record_events=run.record_events, engine=run.engine)
    d = out_dir(args)
    stream_path = d / "stream.bits"
    sim.bits.write(stream_path)
    qio.write_events(d / "events.csv", sim.events)
    tr = sim.feedback_trace
    qio.write_feedback(d / "feedback.csv", tr.t_s, tr.v_bias, tr.v_control)
    manifest = {
        "build": build_id(),
        "seed": run.seed,
        "config_hash": config_hash(run.device),
        "config": dump_config(run),
        "length": {k: v for k, v in length.items()},
        "engine": run.engine,
        "bit_count": sim.bits.bit_count,
        "stream_sha256": qio.file_sha256(stream_path),
        "elapsed_ns": sim.elapsed_ns,
        "counters": sim.counters,
        "events": len(sim.events),
        "feedback_samples": len(tr),
    }
    qio.write_manifest(d / "run-manifest.json", manifest)
    rep = Report(f"simulate -> {d}")
    rep.add("bit_count", sim.bits.bit_count)
    rep.add("elapsed_s", sim.elapsed_s)
    rep.add("bit_rate_hz", sim.bit_rate)
    for k, v in sim.counters.items():
        rep.add(k, v)
    rep.add("config_hash", manifest["config_hash"])
    emit(args, rep)
    return EXIT_OK


# --- analyze --------------------------------------------------------------------------------------------

def _manifest_near(path: Path, explicit) -> dict | None:
    cand = Path(explicit) if explicit else path.parent / "run-manifest.json"
    if cand.exists():
        return qio.read_manifest(cand)
    if explicit:
        raise FileNotFoundError(f"{explicit}: manifest not found")
    return None


def cmd_analyze_bits(args) -> int:
    path = Path(args.input)
    manifest = _manifest_near(path, args.manifest)
    bit_count = args.bit_count
    if bit_count is None and manifest is not None:
        bit_count = int(manifest["bit_count"])
    stream = qio.read_stream(path, bit_count)
    if stream.bit_count < 2:
        raise UsageError("need a stream of at least two bits")
    st = bit_stats(stream)
    rep = Report(f"bit statistics of {path}")
    stats_rows(rep, st)
    cycles = None
    if manifest is not None:
        cycles = manifest.get("counters", {}).get("cycles")
    if args.cycles is not None:
        cycles = args.cycles
    if cycles:
        excess = st.per_cycle_flip_excess(int(cycles))
        rep.add("cycles", int(cycles))
        rep.add("flip_excess_per_cycle", excess, excess / (math.sqrt(st.n) / int(cycles)))
    if args.pavg is not None:
        if st.rel_dev_flip >= 0:
            rep.add("mismatch_from_per_output", estimate_mismatch(st.rel_dev_flip, args.pavg, per_output=True))
            if cycles:
                rep.add("mismatch_from_per_cycle", estimate_mismatch(max(excess, 0.0), args.pavg))
        else:
            rep.add("mismatch_from_per_output", "undefined (hold-dominant)")
    emit(args, rep)
    return EXIT_FAIL if rep.failed else EXIT_OK


def cmd_analyze_counts(args) -> int:
    rows = []
    if args.input:
        rows.extend(qio.read_counts(args.input))
    for i, text in enumerate(args.counts or []):
        try:
            n = [int(x) for x in text.split(",")]
        except ValueError:
            raise UsageError(f"--counts expects n0,n1,n_hold,n_flip, got {text!r}") from None
        if len(n) != 4:
            raise UsageError(f"--counts expects four integers, got {text!r}")
        rows.append((f"row{i + 1}", *n))
    if not rows:
        raise UsageError("give a counts CSV or --counts")
    rep = Report("output statistics from raw counts")
    for label, n0, n1, nh, nf in rows:
        if n0 + n1 == 0 or nh + nf == 0:
            raise UsageError(f"{label}: empty counts")
        if nh + nf != n0 + n1 - 1:
            print(f"warning: {label}: n_hold + n_flip != N - 1", file=sys.stderr)
        stats_rows(rep, StreamStats(n0=n0, n1=n1, n_hold=nh, n_flip=nf), prefix=f"{label}.")
    emit(args, rep)
    return EXIT_FAIL if rep.failed else EXIT_OK


def cmd_analyze_events(args) -> int:
    path = Path(args.input)
    log = qio.read_events(path)
    d = out_dir(args)
    if len(log) == 0:
        print(f"warning: {path} holds no events; histograms are all zero", file=sys.stderr)
    bin_ns = args.bin_ns
    auto = {ch: A.autocorr_hist(log, ch, bin_ns, args.max_lag_ns) for ch in (1, 2)}
    cross = A.crosscorr_hist(log, bin_ns, args.xcorr_range_ns)
    for ch, h in auto.items():
        qio.write_histogram(d / f"autocorr_ch{ch}.csv", h)
    qio.write_histogram(d / "crosscorr.csv", cross)
    rep = Report(f"event correlations of {path}")
    rep.add("events_ch1", len(log.times(1)))
    rep.add("events_ch2", len(log.times(2)))
    rep.add("coincidences", A.coincidence_count(log, args.window_ns))
    rep.add("coincidence_fraction", A.coincidence_fraction(log, args.window_ns))
    if cross.counts.sum() > 0 and cross.hi > 50:
        pk = A.zero_lag_peak(cross)
        rep.add("zero_lag_peak", pk.peak, pk.excess_sigmas)
        rep.add("crosscorr_baseline", pk.baseline)
    for ch, h in auto.items():
        if h.counts.sum() == 0:
            continue
        below = h.bin_lo + h.bin_width <= args.deadtime_ns
        rep.add(f"autocorr_ch{ch}_pairs_in_dip", int(h.counts[below].sum()))
        try:
            fit = A.exp_fit_residuals(h, start=args.deadtime_ns)
        except ValueError:
            continue
        rep.add(f"autocorr_ch{ch}_residual_pp", fit.peak_to_peak)
        rep.add(f"autocorr_ch{ch}_oscillation_pp", fit.oscillation_pp)
        rep.add(f"autocorr_ch{ch}_oscillation_hz", fit.oscillation_freq)
    emit(args, rep)
    return EXIT_OK


def cmd_analyze_feedback(args) -> int:
    t, vb, vc = qio.read_feedback(args.input)
    if t.size < 64:
        print(f"error: {args.input}: periodogram needs at least 64 samples, got {t.size}", file=sys.stderr)
        return EXIT_FAIL
    sel = t >= args.skip_s
    spec = A.periodogram(vb[sel], t=t[sel])
    d = out_dir(args)
    qio.write_spectrum(d / "spectrum.csv", spec)
    verdict = A.resonance_peak(spec, f_max=args.f_max)
    rep = Report(f"feedback spectrum of {args.input}")
    rep.add("samples", int(sel.sum()))
    rep.add("sample_rate_hz", 1.0 / float(np.mean(np.diff(t[sel]))))
    rep.add("peak_freq_hz", verdict["freq_hz"])
    rep.add("peak_to_low_band", verdict["ratio_to_low_band"])
    rep.add("resonant", verdict["resonant"])
    rep.add("v_bias_mean", float(vb[sel].mean()))
    rep.add("v_bias_std", float(vb[sel].std()))
    emit(args, rep)
    return EXIT_OK


# --- predict ---------------------------------------------------------------------------------------------

def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not a probability in [0, 1)")
    return v


def cmd_predict(args) -> int:
    rep = Report("closed-form predictions")
    if args.invert:
        if args.bias is None or args.pavg is None:
            raise UsageError("--invert needs --bias and --pavg")
        if args.bias < 0:
            raise UsageError("negative bias: hold-dominant stream is outside the model")
        if not 0 < args.pavg < 1:
            raise UsageError("--pavg must lie in (0, 1)")
        rep.add("bias", args.bias)
        rep.add("p_avg", args.pavg)
        rep.add("normalization", "per-output" if args.per_output else "per-cycle")
        rep.add("abs_p1_minus_p2", estimate_mismatch(args.bias, args.pavg, per_output=args.per_output))
        emit(args, rep)
        return EXIT_OK
    if args.p1 is None or args.p2 is None:
        raise UsageError("give --p1 and --p2, or --invert with --bias and --pavg")
    alpha, beta, empty = event_probs(args.p1, args.p2)
    rep.add("alpha", alpha)
    rep.add("beta", beta)
    rep.add("p_empty", empty)
    if alpha + beta > 0:
        pf, ph = flip_hold_probs(alpha, beta)
        of, oh = flip_hold_per_output(alpha, beta)
        bias, bound = flip_hold_bias(args.p1, args.p2)
        rep.add("p_flip_per_cycle", pf)
        rep.add("p_hold_per_cycle", ph)
        rep.add("p_flip_per_output", of)
        rep.add("p_hold_per_output", oh)
        rep.add("bias_per_cycle", bias)
        rep.add("bias_lower_bound", bound)
        rep.add("bias_per_output", bias / (alpha + beta))
    rep.add("single_rate_hz", single_click_rate(args.p1, args.p2))
    emit(args, rep)
    return EXIT_OK


# --- validate --------------------------------------------------------------------------------------------

def cmd_validate(args) -> int:
    from .validate import run_checks

    only = set(args.only.split(",")) if args.only else None
    printer = None if args.quiet else (lambda o: print(o.line(), flush=True))
    results = run_checks(args.tier, only, report=printer)
    failed = [o for o in results if not o.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        print("failed: " + ", ".join(o.criterion for o in failed))
        return EXIT_FAIL
    return EXIT_OK


# --- sweep -------------------------------------------------------------------------------------------------

SWEEP_PARAMS = ("temperature", "v_bias", "mismatch", "backflash_prob", "gain")
SWEEP_METRICS = ("dark_rate", "single_rate", "measured_bias", "coincidence_fraction", "oscillation_peak")


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.linspace(float(a), float(b), int(n))
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise UsageError(f"bad grid {text!r}; use start:stop:num or a,b,c") from None


def _sweep_point(base: DeviceConfig, param: str, x: float, pavg: float) -> DeviceConfig:
    if param == "temperature":
        return base.replace(temperature=x)
    if param == "v_bias":
        return base.replace(v_bias_initial=x, feedback_enabled=False)
    if param == "mismatch":
        return base.replace(click_probs=(pavg + x / 2, pavg - x / 2), feedback_enabled=False)
    if param == "backflash_prob":
        return base.replace(detectors=dataclasses.replace(base.detectors, backflash_prob=x))
    return base.replace(feedback=dataclasses.replace(base.feedback, integrator_gain=x))


def _sweep_metric(cfg: DeviceConfig, metric: str, run: RunConfig, seed: int, args) -> dict:
    if metric == "dark_rate":
        return {"dark_rate": 2.0 * dark_rate(cfg.temperature, cfg.detectors)}
    if metric == "single_rate":
        return {"single_rate": device_rate(cfg, cfg.v_bias_initial)}
    length = run.length() if any(v is not None for v in (run.n_bits, run.n_cycles, run.seconds)) else None
    if metric == "measured_bias":
        sim = run_simulation(cfg.replace(feedback_enabled=False), seed, **(length or {"n_cycles": 10**7}), record_events=False)
        c = sim.counters
        holds = c["emitted_bits"] - c["flips"]
        n = c["emitted_bits"]
        row = {
            "measured_bias": (c["flips"] - holds) / c["cycles"] if c["cycles"] else 0.0,
            "rel_dev_flip": (c["flips"] - holds) / n if n else 0.0,
        }
        if cfg.click_probs is not None:
            late = cfg.detectors.late_click_prob
            p1, p2 = (p * (1 - late) for p in cfg.click_probs)
            row["predicted_bias"] = flip_hold_bias(p1, p2)[0]
        return row
    if metric == "coincidence_fraction":
        sim = run_simulation(cfg.replace(feedback_enabled=False), seed, **(length or {"n_bits": 10**6}))
        return {
            "coincidence_fraction": A.coincidence_fraction(sim.events, args.window_ns),
            "expected": expected_coincidence_fraction(cfg, cfg.detectors.backflash_prob, args.window_ns),
        }
    sim = run_simulation(cfg.replace(feedback_enabled=True), seed, **(length or {"seconds": 2.0}), record_events=False)
    tr = sim.feedback_trace
    sel = tr.t_s >= min(0.5, tr.t_s[-1] / 2) if len(tr) else np.zeros(0, bool)
    if sel.sum() < 64:
        return {"oscillation_peak": float("nan"), "resonant": False}
    verdict = A.resonance_peak(A.periodogram(tr.v_bias[sel], t=tr.t_s[sel]))
    return {"oscillation_peak": verdict["freq_hz"], "resonant": verdict["resonant"], "peak_to_low_band": verdict["ratio_to_low_band"]}


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    run = resolve_run(args)
    seed = run.seed if run.seed is not None else 0
    rows = []
    for i, x in enumerate(grid):
        cfg = _sweep_point(run.device, args.parameter, float(x), args.pavg)
        rows.append({args.parameter: float(x), **_sweep_metric(cfg, args.metric, run, seed + i, args)})
    keys = list(rows[0]) if rows else [args.parameter, args.metric]
    lines = [",".join(keys)] + [",".join(fmt(r[k]) for k in keys) for r in rows]
    text = "\n".join(lines) + "\n"
    if args.csv:
        Path(args.csv).write_text(text)
    if not args.quiet:
        sys.stdout.write(text)
    if args.parameter == "v_bias" and args.metric == "single_rate" and not args.quiet:
        eq = equilibrium_map(run.device, grid)
        print(f"# maximum {eq.max_rate:.6g} Hz at v_bias {eq.v_peak:.6g}; lock_risk={fmt(eq.lock_risk)}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------------------------------

def _common_run_flags(p, lengths=True):
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one configuration key")
    p.add_argument("--seed", type=int)
    if lengths:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--bits", type=int)
        g.add_argument("--cycles", type=int)
        g.add_argument("--seconds", type=float)
    p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or .)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qrngsim", description="Two-detector flip/hold random generator simulator.")
    ap.add_argument("--version", action="version", version=build_id())
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the device and write stream, events, feedback trace and manifest")
    _common_run_flags(p)
    p.add_argument("--engine", choices=("auto", "dense", "sparse"))
    p.add_argument("--no-events", action="store_true", help="skip the event log")
    fb = p.add_mutually_exclusive_group()
    fb.add_argument("--feedback", dest="feedback", action="store_true", default=None)
    fb.add_argument("--no-feedback", dest="feedback", action="store_false")
    p.add_argument("--afterpulse", type=float, metavar="PROB", help="enable afterpulsing with this probability")
    p.add_argument("--modulation", type=float, nargs=2, metavar=("DEPTH", "FREQ_HZ"))
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--kv-out", help="also write the key=value report to this file")
    p.set_defaults(func=cmd_simulate)

    an = sub.add_parser("analyze", help="measure streams, events or feedback traces")
    asub = an.add_subparsers(dest="target", required=True)
    b = asub.add_parser("bits", help="zero/one and flip/hold statistics of a packed stream")
    b.add_argument("input")
    b.add_argument("--bit-count", type=int, help="exact bit count (default: manifest, else 8 x bytes)")
    b.add_argument("--manifest", help="run manifest (default: run-manifest.json next to the input)")
    b.add_argument("--cycles", type=int, help="cycle count for the per-cycle normalisation")
    b.add_argument("--pavg", type=float, help="average click probability for the mismatch estimate")
    b.set_defaults(func=cmd_analyze_bits)
    c = asub.add_parser("counts", help="statistics from raw n0,n1,n_hold,n_flip counts")
    c.add_argument("input", nargs="?", help="CSV with header label,n0,n1,n_hold,n_flip")
    c.add_argument("--counts", action="append", metavar="N0,N1,NHOLD,NFLIP")
    c.set_defaults(func=cmd_analyze_counts)
    e = asub.add_parser("events", help="auto/cross-correlation histograms and coincidences")
    e.add_argument("input")
    e.add_argument("--bin-ns", type=float, default=4.0)
    e.add_argument("--window-ns", type=float, default=20.0, help="coincidence window, +-ns")
    e.add_argument("--max-lag-ns", type=float, default=1000.0)
    e.add_argument("--xcorr-range-ns", type=float, default=400.0)
    e.add_argument("--deadtime-ns", type=float, default=150.0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_analyze_events)
    f = asub.add_parser("feedback", help="periodogram of the bias-voltage trace")
    f.add_argument("input")
    f.add_argument("--skip-s", type=float, default=0.0, help="drop samples before this time")
    f.add_argument("--f-max", type=float, default=1000.0)
    f.add_argument("--out")
    f.set_defaults(func=cmd_analyze_feedback)
    for q in (b, c, e, f):
        q.add_argument("--quiet", action="store_true")
        q.add_argument("--kv-out", help="also write the key=value report to this file")

    p = sub.add_parser("predict", help="closed-form flip/hold probabilities, or invert a measured bias")
    p.add_argument("--p1", type=_prob)
    p.add_argument("--p2", type=_prob)
    p.add_argument("--invert", action="store_true")
    p.add_argument("--bias", type=float)
    p.add_argument("--pavg", type=float)
    p.add_argument("--per-output", action="store_true", help="read --bias as a per-output deviation")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--kv-out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("tier", choices=("quick", "full"))
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="evaluate a metric along a parameter grid")
    p.add_argument("parameter", choices=SWEEP_PARAMS)
    p.add_argument("grid", help="start:stop:num or a,b,c")
    p.add_argument("metric", choices=SWEEP_METRICS)
    _common_run_flags(p)
    p.add_argument("--pavg", type=float, default=0.28, help="mean click probability for mismatch sweeps")
    p.add_argument("--window-ns", type=float, default=20.0)
    p.add_argument("--csv", help="write the table here as well")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except qio.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
