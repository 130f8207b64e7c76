"""Core types: packed bit vectors, matching parameters, distance records.

Bit layout (canonical for files and hashing): bit ``j`` lives in byte ``j // 8``
at position ``j % 8`` (little-endian within bytes). Padding bits in the last
byte are always zero, so equal vectors have equal byte representations.

Embedding files use the DEMB format: magic ``b"DEMB"``, version u16=1, n u32,
record count u32, then per record a u32 label followed by ``ceil(n/8)`` packed
bytes. All integers little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_N = 1024

_DEMB_MAGIC = b"DEMB"
_DEMB_VERSION = 1


class FormatError(ValueError):
    """Malformed file or record content."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DiscreteEmbedding:
    """An n-bit vector, stored packed; immutable."""

    bits: np.ndarray  # uint8, length ceil(n/8)
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if b.shape != ((self.n + 7) // 8,):
            raise ValueError(f"packed length {b.shape} wrong for n={self.n}")
        pad = 8 * b.shape[0] - self.n
        if pad and (b[-1] >> (8 - pad)) != 0:
            raise ValueError("padding bits must be zero")
        object.__setattr__(self, "bits", _freeze(b))

    def to_bits(self) -> np.ndarray:
        """Unpacked {0,1} uint8 array of length n."""
        return np.unpackbits(self.bits, count=self.n, bitorder="little")

    def tobytes(self) -> bytes:
        return self.bits.tobytes()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DiscreteEmbedding)
            and self.n == other.n
            and self.bits.tobytes() == other.bits.tobytes()
        )

    def __hash__(self) -> int:
        return hash((self.n, self.bits.tobytes()))


def pack_bits(bools: Sequence[int] | np.ndarray) -> DiscreteEmbedding:
    """Pack a sequence of n booleans/bits into an embedding (n inferred)."""
    arr = np.asarray(bools, dtype=np.uint8)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("need a nonempty 1-d bit sequence")
    if arr.max(initial=0) > 1:
        raise ValueError("bits must be 0 or 1")
    return DiscreteEmbedding(np.packbits(arr, bitorder="little"), int(arr.size))


def unpack_bits(v: DiscreteEmbedding) -> np.ndarray:
    """Inverse of pack_bits: the n significant bits as a uint8 array."""
    return v.to_bits()


def from_packed(data: bytes | np.ndarray, n: int) -> DiscreteEmbedding:
    """Wrap already-packed bytes as an embedding of dimension n."""
    return DiscreteEmbedding(np.frombuffer(bytes(data), dtype=np.uint8).copy(), n)


def hamming_distance(a: DiscreteEmbedding, b: DiscreteEmbedding) -> int:
    """Number of differing coordinates."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} != {b.n}")
    return int(np.bitwise_count(np.bitwise_xor(a.bits, b.bits)).sum())


@dataclass(frozen=True)
class RcphParams:
    """Matching parameters: coordinate portion p, iteration cap m, sizes n, k.

    p is kept as an exact rational so the projection size floor(p*n) never
    suffers a floating-point boundary error.
    """

    p: Fraction
    m: int
    n: int = DEFAULT_N
    k: int = 1

    def __post_init__(self):
        p = Fraction(self.p)
        object.__setattr__(self, "p", p)
        if not 0 < p <= 1:
            raise ValueError(f"p must be in (0, 1], got {p}")
        if self.m < 1 or self.n < 1 or self.k < 1:
            raise ValueError("m, n, k must be positive")
        if self.s < 1:
            raise ValueError(f"floor(p*n) must be >= 1 (p={p}, n={self.n})")

    @property
    def s(self) -> int:
        """Projection size floor(p*n), computed exactly."""
        return (self.p.numerator * self.n) // self.p.denominator


@dataclass(frozen=True)
class DistanceRecord:
    """One query's Hamming distances to k anchors, plus the correct index.

    correct_index is None for deployment-time queries where ground truth is
    unknown.
    """

    distances: tuple
    correct_index: Optional[int] = None

    def __post_init__(self):
        d = tuple(int(x) for x in self.distances)
        object.__setattr__(self, "distances", d)
        if not d:
            raise ValueError("need at least one distance")
        if any(x < 0 for x in d):
            raise ValueError("distances must be nonnegative")
        if self.correct_index is not None and not 0 <= self.correct_index < len(d):
            raise ValueError(f"correct_index {self.correct_index} out of range")

    @property
    def k(self) -> int:
        return len(self.distances)


def distance_record(
    query: DiscreteEmbedding,
    anchors: Sequence[DiscreteEmbedding],
    correct_index: Optional[int] = None,
) -> DistanceRecord:
    """Distances from query to each anchor, in anchor order."""
    if not anchors:
        raise ValueError("need at least one anchor")
    if correct_index is not None and not 0 <= correct_index < len(anchors):
        raise ValueError("correct_index out of range")
    return DistanceRecord(
        tuple(hamming_distance(query, a) for a in anchors), correct_index
    )


@dataclass(frozen=True)
class MatchOutcome:
    """Result of one query: Match(class_index, iterations) or Abstain."""

    class_index: Optional[int]
    iterations_used: int

    @classmethod
    def match(cls, class_index: int, iterations_used: int) -> "MatchOutcome":
        return cls(class_index, iterations_used)

    @classmethod
    def abstain(cls, m: int) -> "MatchOutcome":
        return cls(None, m)

    @property
    def is_match(self) -> bool:
        return self.class_index is not None


# ------------------------------------------------------------------ DEMB files

def write_embeddings(path, records: Iterable[tuple[int, DiscreteEmbedding]]) -> None:
    """Write (label, embedding) records to a DEMB file."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    n = records[0][1].n
    for _, e in records:
        if e.n != n:
            raise ValueError("all records must share one dimension")
    with open(path, "wb") as f:
        f.write(_DEMB_MAGIC)
        f.write(struct.pack("<HII", _DEMB_VERSION, n, len(records)))
        for label, e in records:
            f.write(struct.pack("<I", label & 0xFFFFFFFF))
            f.write(e.tobytes())


def read_embeddings(path) -> list[tuple[int, DiscreteEmbedding]]:
    """Read (label, embedding) records from a DEMB file."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _DEMB_MAGIC:
        raise FormatError("not an embedding file (bad magic)")
    try:
        version, n, count = struct.unpack_from("<HII", data, 4)
    except struct.error as e:
        raise FormatError("truncated header") from e
    if version != _DEMB_VERSION:
        raise FormatError(f"unsupported version {version}")
    if n < 1:
        raise FormatError("n must be positive")
    nb = (n + 7) // 8
    off = 14
    out = []
    for _ in range(count):
        if off + 4 + nb > len(data):
            raise FormatError("truncated record")
        (label,) = struct.unpack_from("<I", data, off)
        off += 4
        out.append((label, from_packed(data[off : off + nb], n)))
        off += nb
    return out
