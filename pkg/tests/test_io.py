import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrngsim import io as qio
from qrngsim.analysis import EventLog, Histogram, Spectrum
from qrngsim.bitstream import BitStream


@given(st.lists(st.tuples(st.integers(0, 10**9), st.integers(1, 2), st.integers(1, 2)), max_size=40))
def test_events_round_trip(rows):
    import tempfile
    from pathlib import Path

    rows = sorted(rows)
    t = np.array([r[0] / 8 for r in rows], dtype=float)  # multiples of 1/8 ns print exactly at %.3f
    log = EventLog(t, np.array([r[1] for r in rows], np.uint8), np.array([r[2] for r in rows], np.uint8))
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "e.csv"
        qio.write_events(p, log)
        back = qio.read_events(p)
    assert np.array_equal(back.t, log.t)
    assert np.array_equal(back.channel, log.channel)
    assert np.array_equal(back.kind, log.kind)


def test_events_text_format(tmp_path):
    p = tmp_path / "e.csv"
    qio.write_events(p, EventLog(np.array([1.5, 2.0]), np.array([1, 2], np.uint8), np.array([1, 2], np.uint8)))
    assert p.read_text().splitlines() == ["t_ns,channel,kind", "1.500,1,prompt", "2.000,2,late"]


def test_empty_events_round_trip(tmp_path):
    p = tmp_path / "e.csv"
    qio.write_events(p, EventLog.empty())
    assert len(qio.read_events(p)) == 0


@pytest.mark.parametrize(
    "body, line, msg",
    [
        ("t_ns,channel,kind\n1.0,1,prompt\nabc,1,prompt\n", "line 3", "bad number"),
        ("t_ns,channel,kind\n1.0,3,prompt\n", "line 2", "channel"),
        ("t_ns,channel,kind\n1.0,1,early\n", "line 2", "kind"),
        ("t_ns,channel,kind\n5.0,1,prompt\n1.0,2,prompt\n", "line 3", "non-decreasing"),
        ("t_ns,channel,kind\n1.0,1\n", "line 2", "fields"),
        ("time,ch,kind\n", "line 1", "header"),
        ("", "line 1", "header"),
    ],
)
def test_event_parse_errors_name_line(tmp_path, body, line, msg):
    p = tmp_path / "e.csv"
    p.write_text(body)
    with pytest.raises(qio.ParseError, match=msg) as info:
        qio.read_events(p)
    assert info.value.where == line
    assert line in str(info.value)


def test_feedback_round_trip(tmp_path):
    t = np.arange(1, 6) * 1e-3
    vb = 24 + np.linspace(0, 1, 5)
    qio.write_feedback(tmp_path / "f.csv", t, vb, vb + 0.1)
    a, b, c = qio.read_feedback(tmp_path / "f.csv")
    np.testing.assert_allclose(a, t)
    np.testing.assert_allclose(b, vb, atol=1e-9)
    np.testing.assert_allclose(c, vb + 0.1, atol=1e-9)


def test_histogram_and_spectrum_files(tmp_path):
    h = Histogram(4.0, 0.0, 16.0, np.array([1, 2, 3, 4]), 10)
    qio.write_histogram(tmp_path / "h.csv", h)
    lo, counts = qio.read_histogram(tmp_path / "h.csv")
    assert lo.tolist() == [0, 4, 8, 12] and counts.tolist() == [1, 2, 3, 4]
    qio.write_spectrum(tmp_path / "s.csv", Spectrum(np.array([0.0, 1.0]), np.array([2.0, 3.0])))
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "freq_hz,power"


def test_counts_file(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("label,n0,n1,n_hold,n_flip\nx,1,2,1,1\n")
    assert qio.read_counts(p) == [("x", 1, 2, 1, 1)]
    p.write_text("label,n0,n1,n_hold,n_flip\nx,1,2,1,1\ny,1,-2,1,1\n")
    with pytest.raises(qio.ParseError, match="line 3"):
        qio.read_counts(p)


def test_stream_errors_name_byte(tmp_path):
    p = tmp_path / "s.bits"
    p.write_bytes(bytes([0, 0xFF]))
    with pytest.raises(qio.ParseError) as info:
        qio.read_stream(p, 12)
    assert info.value.where == "byte 1"
    assert qio.read_stream(p).bit_count == 16


def test_manifest(tmp_path):
    p = tmp_path / "m.json"
    qio.write_manifest(p, {"a": 1, "b": [1, 2]})
    assert qio.read_manifest(p) == {"a": 1, "b": [1, 2]}
    p.write_text('{"a": 1,,}')
    with pytest.raises(qio.ParseError, match="byte"):
        qio.read_manifest(p)


def test_sha256(tmp_path):
    p = tmp_path / "x"
    BitStream.from_bits([1, 0, 1]).write(p)
    # sha256 of the single byte 0x05
    assert qio.file_sha256(p) == "e77b9a9ae9e30b0dbdb6f510a264ef9de781501d7b6b92ae89eb059c5ab743db"
