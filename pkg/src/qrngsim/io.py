"""File formats: packed bit streams, CSV tables and the run manifest.

All CSV files carry a mandatory header row.  Readers raise :class:`ParseError` naming the
offending line (or byte offset for binary input).
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .analysis import KIND_CODES, KIND_NAMES, EventLog, Histogram, Spectrum
from .bitstream import BitStream

EVENTS_HEADER = ("t_ns", "channel", "kind")
FEEDBACK_HEADER = ("t_s", "v_bias", "v_control")
HISTOGRAM_HEADER = ("bin_lo_ns", "count")
SPECTRUM_HEADER = ("freq_hz", "power")
COUNTS_HEADER = ("label", "n0", "n1", "n_hold", "n_flip")


class ParseError(ValueError):
    """Malformed input; ``where`` is a human-readable location such as ``line 12``."""

    def __init__(self, path, where: str, message: str):
        self.path = str(path)
        self.where = where
        super().__init__(f"{path}: {where}: {message}")


def _write_table(path, header, columns, fmts) -> None:
    path = Path(path)
    n = len(columns[0]) if columns else 0
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        if n:
            rows = np.column_stack([np.asarray(c, dtype=object) for c in columns])
            fmt = ",".join(fmts)
            fh.write("\n".join(fmt % tuple(r) for r in rows))
            fh.write("\n")


def _read_rows(path, header):
    """Yield (line number, fields) after checking the header."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(path, "line 1", "missing header") from None
        if tuple(f.strip() for f in first) != header:
            raise ParseError(path, "line 1", f"expected header {','.join(header)}, got {','.join(first)}")
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(path, f"line {reader.line_num}", f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, row


def _floats(path, header):
    out = []
    for line, row in _read_rows(path, header):
        try:
            out.append([float(x) for x in row])
        except ValueError:
            raise ParseError(path, f"line {line}", f"not a number in {row!r}") from None
    return np.array(out, dtype=float).reshape(-1, len(header))


# --- events --------------------------------------------------------------------------

def write_events(path, log: EventLog) -> None:
    kinds = np.array([KIND_NAMES[int(k)] for k in log.kind], dtype=object) if len(log) else []
    _write_table(path, EVENTS_HEADER, [log.t, log.channel.astype(int), kinds], ["%.3f", "%d", "%s"])


def read_events(path) -> EventLog:
    t, ch, kind = [], [], []
    last = -np.inf
    for line, row in _read_rows(path, EVENTS_HEADER):
        try:
            ti = float(row[0])
            ci = int(row[1])
        except ValueError:
            raise ParseError(path, f"line {line}", f"bad number in {row!r}") from None
        if ci not in (1, 2):
            raise ParseError(path, f"line {line}", f"channel must be 1 or 2, got {ci}")
        k = KIND_CODES.get(row[2].strip())
        if k is None:
            raise ParseError(path, f"line {line}", f"kind must be prompt or late, got {row[2]!r}")
        if ti < last:
            raise ParseError(path, f"line {line}", "timestamps must be non-decreasing")
        last = ti
        t.append(ti)
        ch.append(ci)
        kind.append(k)
    return EventLog(np.array(t, dtype=float), np.array(ch, dtype=np.uint8), np.array(kind, dtype=np.uint8))


# --- feedback trace ----------------------------------------------------------------------

def write_feedback(path, t_s, v_bias, v_control) -> None:
    _write_table(path, FEEDBACK_HEADER, [t_s, v_bias, v_control], ["%.6f", "%.9f", "%.9f"])


def read_feedback(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = _floats(path, FEEDBACK_HEADER)
    return a[:, 0], a[:, 1], a[:, 2]


# --- histograms and spectra ----------------------------------------------------------------

def write_histogram(path, hist: Histogram) -> None:
    _write_table(path, HISTOGRAM_HEADER, [hist.bin_lo, hist.counts], ["%.6g", "%d"])


def read_histogram(path) -> tuple[np.ndarray, np.ndarray]:
    a = _floats(path, HISTOGRAM_HEADER)
    return a[:, 0], a[:, 1].astype(np.int64)


def write_spectrum(path, spec: Spectrum) -> None:
    _write_table(path, SPECTRUM_HEADER, [spec.freq, spec.power], ["%.9g", "%.9g"])


# --- raw output counts ------------------------------------------------------------------------

def read_counts(path) -> list[tuple[str, int, int, int, int]]:
    rows = []
    for line, row in _read_rows(path, COUNTS_HEADER):
        try:
            n = [int(x) for x in row[1:]]
        except ValueError:
            raise ParseError(path, f"line {line}", f"counts must be integers, got {row[1:]!r}") from None
        if min(n) < 0:
            raise ParseError(path, f"line {line}", "counts must be non-negative")
        rows.append((row[0].strip(), *n))
    return rows


# --- bit streams and manifest ------------------------------------------------------------------

def read_stream(path, bit_count: int | None = None) -> BitStream:
    try:
        return BitStream.read(path, bit_count)
    except ValueError as exc:
        raw = Path(path).stat().st_size
        raise ParseError(path, f"byte {max(raw - 1, 0)}", str(exc)) from None


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"byte {exc.pos}", exc.msg) from None


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
