"""Matching engine: preprocess anchors into hashed-projection tables, query
with abstention, and per-user salting.

Preprocessing draws m coordinate combinations, projects every anchor through
each, and stores only digests: table_i maps family_hash(i, project(a_j, c_i))
to j. A digest collision between two anchors inside one iteration triggers a
redraw of that iteration's combination (bounded retries); anchors that no
combination can separate (identical vectors) are rejected.

Queries walk iterations in order and return Match(j, i+1) at the first digest
hit, else Abstain(m). The stored index is pan-private: it contains parameters,
combinations, the hash key, digests and labels — never anchor bits or raw
projections.

Index files: magic ``b"RCPH"``, version u16=1, n/k/m u32, p as numerator u32 +
denominator u32, seed u64, system_key 32 bytes, m combination blocks (length
u32 then sorted u32 coordinates), m table blocks (k entries of 32-byte digest
+ u32 class index), then k u32 labels. Integers little-endian.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from ._rng import derive
from .core import (
    DiscreteEmbedding,
    FormatError,
    MatchOutcome,
    RcphParams,
    from_packed,
)
from .hashing import DIGEST_BYTES, digest_prefix

RETRY_CAP = 64
_MAGIC = b"RCPH"
_VERSION = 1
# queries project lazily in growing chunks: early hits skip most packing work
_QUERY_CHUNK_FIRST = 16
_QUERY_CHUNK_MAX = 512


class EngineError(ValueError):
    """Invalid engine input."""


class DegenerateAnchorsError(EngineError):
    """Anchors that keep colliding after the retry cap (identical or near-identical)."""


@dataclass(frozen=True, eq=False)
class PreprocessedIndex:
    """Immutable result of preprocessing; safe for concurrent queries."""

    params: RcphParams
    combinations: np.ndarray  # (m, s) int64, each row sorted
    system_key: bytes
    tables: tuple  # m dicts: digest bytes -> class index
    labels: tuple  # k labels
    seed: int
    regenerations: int = field(default=0, compare=False)

    def __post_init__(self):
        c = np.ascontiguousarray(self.combinations, dtype=np.int64)
        c.flags.writeable = False
        object.__setattr__(self, "combinations", c)


def _system_key(seed: int) -> bytes:
    return hashlib.sha256(b"RCPH-system-key" + struct.pack("<Q", seed)).digest()


def _digests_for_column(
    prefix: bytes, packed_col: np.ndarray
) -> list[bytes]:
    # packed_col: (k, bpc) packed projections of all anchors for one iteration
    sha = hashlib.sha256
    buf = packed_col.tobytes()
    bpc = packed_col.shape[1]
    return [sha(prefix + buf[a * bpc : (a + 1) * bpc]).digest() for a in range(packed_col.shape[0])]


def preprocess(
    anchors: Sequence[DiscreteEmbedding],
    params: RcphParams,
    seed: int,
    labels: Optional[Sequence[int]] = None,
) -> PreprocessedIndex:
    """Build the hashed-projection index for k anchors, deterministically."""
    k, n, m, s = params.k, params.n, params.m, params.s
    if len(anchors) != k:
        raise EngineError(f"expected {k} anchors, got {len(anchors)}")
    for a in anchors:
        if a.n != n:
            raise EngineError(f"anchor dimension {a.n} != {n}")
    if labels is None:
        labels = tuple(range(k))
    else:
        labels = tuple(int(x) for x in labels)
        if len(labels) != k:
            raise EngineError("labels length != k")

    bits = np.stack([a.to_bits() for a in anchors])  # (k, n)
    streams = _kernels.iteration_streams(seed, m)
    combs, packed = _kernels.build_projections(streams, n, s, bits)
    key = _system_key(seed)
    bpc = packed.shape[2]

    # hash in bulk from the contiguous (k, m, bpc) buffer
    sha = hashlib.sha256
    buf = packed.tobytes()
    mv = memoryview(buf)
    tables = []
    regens = 0
    combs = np.ascontiguousarray(combs)
    for i in range(m):
        prefix = digest_prefix(key, i)
        digs = [
            sha(prefix + mv[(a * m + i) * bpc : (a * m + i + 1) * bpc]).digest()
            for a in range(k)
        ]
        table = dict(zip(digs, range(k)))
        if len(table) < k:
            # collision: redraw this iteration's combination until all k differ
            for r in range(1, RETRY_CAP + 1):
                regens += 1
                comb_r = _kernels.combination_from_stream(
                    _kernels.retry_stream(streams[i], r), n, s
                )
                col = _kernels.pack_projections(bits, comb_r[None, :])[:, 0, :]
                digs = _digests_for_column(prefix, col)
                table = dict(zip(digs, range(k)))
                if len(table) == k:
                    combs[i] = comb_r
                    break
            else:
                raise DegenerateAnchorsError(
                    f"iteration {i}: anchors still collide after {RETRY_CAP} redraws "
                    "(identical or near-identical anchors)"
                )
        tables.append(table)

    return PreprocessedIndex(
        params=params,
        combinations=combs,
        system_key=key,
        tables=tuple(tables),
        labels=labels,
        seed=seed,
        regenerations=regens,
    )


def query(index: PreprocessedIndex, x: DiscreteEmbedding) -> MatchOutcome:
    """First digest hit wins; Abstain after m misses."""
    params = index.params
    if x.n != params.n:
        raise EngineError(f"probe dimension {x.n} != {params.n}")
    m = params.m
    xbits = x.to_bits()[None, :]
    key = index.system_key
    sha = hashlib.sha256
    tables = index.tables
    c0, chunk = 0, _QUERY_CHUNK_FIRST
    while c0 < m:
        sub = index.combinations[c0 : c0 + chunk]
        packed = _kernels.pack_projections(xbits, sub)[0]  # (chunk, bpc)
        bpc = packed.shape[1]
        buf = packed.tobytes()
        for j in range(sub.shape[0]):
            i = c0 + j
            dg = sha(digest_prefix(key, i) + buf[j * bpc : (j + 1) * bpc]).digest()
            hit = tables[i].get(dg)
            if hit is not None:
                return MatchOutcome.match(hit, i + 1)
        c0 += sub.shape[0]
        chunk = min(chunk * 2, _QUERY_CHUNK_MAX)
    return MatchOutcome.abstain(m)


# ------------------------------------------------------------------- salting

@dataclass(frozen=True)
class Salt:
    """Per-user random bit vector, stored publicly alongside the user id."""

    bits: DiscreteEmbedding
    owner: str


def make_salt(n: int, owner: str, seed: int) -> Salt:
    """Deterministic uniform salt (callers pick unpredictable seeds in production)."""
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, 256, (n + 7) // 8, dtype=np.uint8)
    pad = 8 * raw.size - n
    if pad:
        raw[-1] &= 0xFF >> pad
    return Salt(bits=from_packed(raw.tobytes(), n), owner=owner)


def apply_salt(v: DiscreteEmbedding, salt: Salt) -> DiscreteEmbedding:
    """Coordinate-wise addition mod 2 (XOR); an involution."""
    if v.n != salt.bits.n:
        raise EngineError(f"salt length {salt.bits.n} != {v.n}")
    return from_packed(np.bitwise_xor(v.bits, salt.bits.bits).tobytes(), v.n)


class SaltRegistry:
    """Verification-mode store: one salt and one single-anchor index per user.

    Enrollment salts the user's embedding and indexes it alone (k=1); a query
    must name the claimed user, is salted with that user's salt, and matches
    only against that user's anchor.
    """

    def __init__(self, p: Fraction, m: int, n: int, seed: int = 0):
        self.params = RcphParams(p=Fraction(p), m=m, n=n, k=1)
        self.seed = seed
        self._users: dict = {}

    def enroll(self, user_id: str, v: DiscreteEmbedding) -> None:
        if user_id in self._users:
            raise EngineError(f"user {user_id!r} already enrolled")
        if v.n != self.params.n:
            raise EngineError("embedding dimension mismatch")
        uid_stream = derive(self.seed, len(self._users))
        salt = make_salt(self.params.n, user_id, uid_stream)
        idx = preprocess([apply_salt(v, salt)], self.params, derive(uid_stream, 1))
        self._users[user_id] = (salt, idx)

    def query(self, user_id: str, v: DiscreteEmbedding) -> MatchOutcome:
        if user_id not in self._users:
            raise EngineError(f"unknown user {user_id!r}")
        salt, idx = self._users[user_id]
        return query(idx, apply_salt(v, salt))

    def salt_of(self, user_id: str) -> Salt:
        return self._users[user_id][0]


def salted_enroll(user_id: str, v: DiscreteEmbedding, registry: SaltRegistry) -> None:
    registry.enroll(user_id, v)


def salted_query(user_id: str, v: DiscreteEmbedding, registry: SaltRegistry) -> MatchOutcome:
    return registry.query(user_id, v)


# ------------------------------------------------------------- serialization

def serialize_index(index: PreprocessedIndex) -> bytes:
    """Canonical bytes of an index (parameters, combinations, key, digests, labels)."""
    p = index.params
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<H", _VERSION)
    out += struct.pack(
        "<IIIII", p.n, p.k, p.m, p.p.numerator, p.p.denominator
    )
    out += struct.pack("<Q", index.seed)
    out += index.system_key
    for row in index.combinations:
        out += struct.pack("<I", row.size)
        out += row.astype("<u4").tobytes()
    for table in index.tables:
        for dg, j in table.items():
            out += dg
            out += struct.pack("<I", j)
    for lab in index.labels:
        out += struct.pack("<I", lab & 0xFFFFFFFF)
    return bytes(out)


def deserialize_index(data: bytes) -> PreprocessedIndex:
    if data[:4] != _MAGIC:
        raise FormatError("not an index file (bad magic)")
    try:
        (version,) = struct.unpack_from("<H", data, 4)
        if version != _VERSION:
            raise FormatError(f"unsupported index version {version}")
        n, k, m, pnum, pden = struct.unpack_from("<IIIII", data, 6)
        (seed,) = struct.unpack_from("<Q", data, 26)
        key = bytes(data[34:66])
        if len(key) != 32:
            raise FormatError("truncated system key")
        params = RcphParams(p=Fraction(pnum, pden), m=m, n=n, k=k)
        off = 66
        s = params.s
        combs = np.empty((m, s), np.int64)
        for i in range(m):
            (ln,) = struct.unpack_from("<I", data, off)
            off += 4
            if ln != s:
                raise FormatError(f"combination {i} length {ln} != {s}")
            combs[i] = np.frombuffer(data, dtype="<u4", count=ln, offset=off)
            off += 4 * ln
        tables = []
        for _ in range(m):
            t = {}
            for _ in range(k):
                dg = bytes(data[off : off + DIGEST_BYTES])
                if len(dg) != DIGEST_BYTES:
                    raise FormatError("truncated table entry")
                off += DIGEST_BYTES
                (j,) = struct.unpack_from("<I", data, off)
                off += 4
                t[dg] = j
            if len(t) != k:
                raise FormatError("duplicate digests in table")
            tables.append(t)
        labels = struct.unpack_from(f"<{k}I", data, off)
        off += 4 * k
    except struct.error as e:
        raise FormatError("truncated index") from e
    return PreprocessedIndex(
        params=params,
        combinations=combs,
        system_key=key,
        tables=tuple(tables),
        labels=tuple(labels),
        seed=seed,
    )


def write_index(path, index: PreprocessedIndex) -> None:
    with open(path, "wb") as f:
        f.write(serialize_index(index))


def read_index(path) -> PreprocessedIndex:
    with open(path, "rb") as f:
        return deserialize_index(f.read())
