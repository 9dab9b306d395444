"""Packed bit streams and exact zero/one and flip/hold counting.

Bits are packed LSB-first: bit ``i`` of the stream is bit ``i % 8`` of byte ``i // 8``.
Pad bits in the last byte are zero and never counted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class BitStream:
    data: np.ndarray  # uint8, packed LSB-first
    bit_count: int

    def __post_init__(self):
        if self.bit_count < 0 or self.bit_count > 8 * self.data.size:
            raise ValueError("bit_count exceeds the packed length")
        if self.data.size != (self.bit_count + 7) // 8:
            raise ValueError("packed length does not match bit_count")

    def __len__(self):
        return self.bit_count

    @classmethod
    def from_bits(cls, bits) -> "BitStream":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size and bits.max() > 1:
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(bits, bitorder="little"), int(bits.size))

    @classmethod
    def empty(cls) -> "BitStream":
        return cls(np.zeros(0, dtype=np.uint8), 0)

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(self.data, count=self.bit_count, bitorder="little")

    def write(self, path) -> None:
        Path(path).write_bytes(self.data.tobytes())

    @classmethod
    def read(cls, path, bit_count: int | None = None) -> "BitStream":
        raw = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8).copy()
        if bit_count is None:
            bit_count = 8 * raw.size
        if bit_count > 8 * raw.size or raw.size != (bit_count + 7) // 8:
            raise ValueError(
                f"{path}: {raw.size} bytes cannot hold exactly {bit_count} bits"
            )
        pad = 8 * raw.size - bit_count
        if pad and raw[-1] >> (8 - pad):
            raise ValueError(f"{path}: nonzero pad bits in final byte at offset {raw.size - 1}")
        return cls(raw, bit_count)


class BitWriter:
    """Append-only packer used by the simulator to emit bits chunk by chunk."""

    def __init__(self):
        self._chunks: list[np.ndarray] = []
        self._tail = np.zeros(0, dtype=np.uint8)
        self.bit_count = 0

    def extend(self, bits: np.ndarray) -> None:
        if bits.size == 0:
            return
        self.bit_count += int(bits.size)
        if self._tail.size:
            bits = np.concatenate([self._tail, bits])
        full = bits.size - bits.size % 8
        if full:
            self._chunks.append(np.packbits(bits[:full], bitorder="little"))
        self._tail = bits[full:].copy()

    def getvalue(self) -> BitStream:
        parts = list(self._chunks)
        if self._tail.size:
            parts.append(np.packbits(self._tail, bitorder="little"))
        data = np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
        return BitStream(data, self.bit_count)


@dataclass(frozen=True)
class PartialCounts:
    """Mergeable counts for a contiguous piece of a stream."""

    n_bits: int = 0
    n1: int = 0
    n_flip: int = 0
    first: int = -1
    last: int = -1

    def merge(self, other: "PartialCounts") -> "PartialCounts":
        if self.n_bits == 0:
            return other
        if other.n_bits == 0:
            return self
        boundary = int(self.last != other.first)
        return PartialCounts(
            self.n_bits + other.n_bits,
            self.n1 + other.n1,
            self.n_flip + other.n_flip + boundary,
            self.first,
            other.last,
        )


def count_bytes(data: np.ndarray, bit_count: int) -> PartialCounts:
    """Exact counts for ``bit_count`` bits packed LSB-first in ``data``."""
    if bit_count == 0:
        return PartialCounts()
    full = bit_count // 8
    rem = bit_count % 8
    body = data[:full]
    n1 = int(np.bitwise_count(body).sum(dtype=np.int64))
    # adjacent transitions inside each byte (bits 0..6 of b ^ (b >> 1))
    n_flip = int(np.bitwise_count((body ^ (body >> 1)) & 0x7F).sum(dtype=np.int64))
    if full > 1:
        n_flip += int(np.count_nonzero((body[:-1] >> 7) != (body[1:] & 1)))
    first = int(data[0] & 1)
    last = int(body[-1] >> 7) if full else -1
    if rem:
        tail_bits = np.unpackbits(data[full : full + 1], count=rem, bitorder="little")
        n1 += int(tail_bits.sum())
        n_flip += int(np.count_nonzero(tail_bits[1:] != tail_bits[:-1]))
        if full:
            n_flip += int(last != tail_bits[0])
        last = int(tail_bits[-1])
    return PartialCounts(bit_count, n1, n_flip, first, last)


@dataclass(frozen=True)
class StreamStats:
    n0: int
    n1: int
    n_hold: int
    n_flip: int

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def rel_dev_balance(self) -> float:
        return (self.n1 - self.n0) / (self.n1 + self.n0)

    @property
    def rel_dev_flip(self) -> float:
        return (self.n_flip - self.n_hold) / (self.n_flip + self.n_hold)

    @property
    def sigma(self) -> float:
        return sigma_threshold(self.n)

    @property
    def balance_significance(self) -> float:
        return self.rel_dev_balance / self.sigma

    @property
    def flip_significance(self) -> float:
        return self.rel_dev_flip / self.sigma

    def per_cycle_flip_excess(self, n_cycles: int) -> float:
        """(N_flip - N_hold) / cycles: the flip excess normalised per simulated cycle."""
        return (self.n_flip - self.n_hold) / n_cycles

    def as_dict(self) -> dict:
        return {
            "n0": self.n0,
            "n1": self.n1,
            "rel_dev_balance": self.rel_dev_balance,
            "n_hold": self.n_hold,
            "n_flip": self.n_flip,
            "rel_dev_flip": self.rel_dev_flip,
            "sigma": self.sigma,
            "balance_sigmas": self.balance_significance,
            "flip_sigmas": self.flip_significance,
        }


def sigma_threshold(n: int) -> float:
    """Standard deviation N^-1/2 of a relative deviation from equiprobable."""
    if n <= 0:
        raise ValueError("N must be positive")
    return 1.0 / math.sqrt(n)


def stats_from_counts(c: PartialCounts) -> StreamStats:
    if c.n_bits < 2:
        raise ValueError("need at least two bits")
    return StreamStats(
        n0=c.n_bits - c.n1, n1=c.n1, n_hold=c.n_bits - 1 - c.n_flip, n_flip=c.n_flip
    )


def bit_stats(stream: BitStream, chunk_bytes: int = 1 << 24) -> StreamStats:
    """Exact zero/one and hold/flip counts of a stream, evaluated chunk by chunk."""
    if stream.bit_count < 2:
        raise ValueError("bit_stats needs at least two bits")
    total = PartialCounts()
    full_bytes = stream.bit_count // 8
    for start in range(0, full_bytes, chunk_bytes):
        stop = min(start + chunk_bytes, full_bytes)
        total = total.merge(count_bytes(stream.data[start:stop], 8 * (stop - start)))
    rem = stream.bit_count % 8
    if rem:
        total = total.merge(count_bytes(stream.data[full_bytes:], rem))
    return stats_from_counts(total)
