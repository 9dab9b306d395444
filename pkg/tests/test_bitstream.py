import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrngsim.bitstream import (
    BitStream,
    BitWriter,
    PartialCounts,
    StreamStats,
    bit_stats,
    count_bytes,
    sigma_threshold,
    stats_from_counts,
)

bit_lists = st.lists(st.integers(0, 1), min_size=2, max_size=400)


def naive(bits):
    b = np.asarray(bits)
    flips = int(np.count_nonzero(b[1:] != b[:-1]))
    return StreamStats(int((b == 0).sum()), int((b == 1).sum()), b.size - 1 - flips, flips)


def test_lsb_first_packing():
    s = BitStream.from_bits([1, 0, 0, 0, 0, 0, 0, 0, 1, 1])
    assert s.data.tolist() == [1, 3]
    assert s.bit_count == 10


@given(bit_lists)
def test_round_trip(bits):
    s = BitStream.from_bits(bits)
    assert s.to_bits().tolist() == bits


@given(bit_lists, st.integers(1, 5))
def test_counts_match_naive(bits, chunk):
    s = BitStream.from_bits(bits)
    assert bit_stats(s, chunk_bytes=chunk) == naive(bits)


@given(bit_lists, bit_lists, bit_lists)
def test_merge_is_associative(a, b, c):
    pa, pb, pc = (count_bytes(BitStream.from_bits(x).data, len(x)) for x in (a, b, c))
    left = pa.merge(pb).merge(pc)
    right = pa.merge(pb.merge(pc))
    assert left == right
    assert stats_from_counts(left) == naive(a + b + c)


def test_merge_identity():
    p = count_bytes(BitStream.from_bits([1, 0, 1]).data, 3)
    assert PartialCounts().merge(p) == p
    assert p.merge(PartialCounts()) == p


@given(bit_lists)
def test_hold_plus_flip_is_n_minus_one(bits):
    st_ = bit_stats(BitStream.from_bits(bits))
    assert st_.n_hold + st_.n_flip == len(bits) - 1
    assert st_.n0 + st_.n1 == len(bits)


@given(st.lists(st.lists(st.integers(0, 1), max_size=50), max_size=10))
def test_writer_concatenates(parts):
    w = BitWriter()
    for p in parts:
        w.extend(np.array(p, dtype=np.uint8))
    flat = [b for p in parts for b in p]
    out = w.getvalue()
    assert out.bit_count == len(flat)
    assert out.to_bits().tolist() == flat


def test_file_round_trip(tmp_path):
    bits = np.random.default_rng(0).integers(0, 2, 1001).astype(np.uint8)
    s = BitStream.from_bits(bits)
    s.write(tmp_path / "x.bits")
    back = BitStream.read(tmp_path / "x.bits", 1001)
    assert np.array_equal(back.to_bits(), bits)
    assert BitStream.read(tmp_path / "x.bits").bit_count == 8 * s.data.size


def test_read_rejects_bad_lengths(tmp_path):
    p = tmp_path / "x.bits"
    p.write_bytes(bytes([0xFF, 0xFF]))
    with pytest.raises(ValueError):
        BitStream.read(p, 20)
    with pytest.raises(ValueError):
        BitStream.read(p, 4)
    with pytest.raises(ValueError, match="pad bits"):
        BitStream.read(p, 12)


def test_constructor_checks():
    with pytest.raises(ValueError):
        BitStream(np.zeros(1, dtype=np.uint8), 9)
    with pytest.raises(ValueError):
        BitStream.from_bits([0, 2])


def test_sigma_threshold():
    assert sigma_threshold(2**30) == pytest.approx(2**-15)
    with pytest.raises(ValueError):
        sigma_threshold(0)


def test_reference_row_deviations():
    # first reference row: printed as 5.4e-06 and 7.9e-05
    s = StreamStats(536867999, 536873825, 536828388, 536913435)
    assert f"{s.rel_dev_balance:.1e}" == "5.4e-06"
    assert f"{s.rel_dev_flip:.1e}" == "7.9e-05"
    assert s.n == 2**30
    assert s.n_hold + s.n_flip == 2**30 - 1
    assert s.sigma == pytest.approx(3.05e-5, rel=1e-3)


def test_per_cycle_flip_excess():
    s = StreamStats(5, 5, 3, 6)
    assert s.per_cycle_flip_excess(30) == pytest.approx(0.1)
    d = s.as_dict()
    assert d["flip_sigmas"] == pytest.approx(s.rel_dev_flip * math.sqrt(10))


def test_too_short():
    with pytest.raises(ValueError):
        bit_stats(BitStream.from_bits([1]))
