"""Coordinate combinations, projections, and the keyed one-way hash family.

The family {h_0, ..., h_{m-1}} is one keyed cryptographic hash with domain
separation: digest = sha256(system_key || iteration_index_u32le || packed
projected bits). Distinct iteration indices therefore behave as independent
one-way functions while the stored key stays 32 bytes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .core import DiscreteEmbedding

DIGEST_BYTES = 32


@dataclass(frozen=True)
class HashFamilyKey:
    """System-wide 32-byte key plus the iteration index it is bound to."""

    system_key: bytes
    iteration_index: int

    def __post_init__(self):
        if len(self.system_key) != 32:
            raise ValueError("system_key must be 32 bytes")
        if self.iteration_index < 0:
            raise ValueError("iteration_index must be nonnegative")


def one_way_hash(data: bytes) -> bytes:
    """The raw one-way function h: 32-byte sha256 digest."""
    return hashlib.sha256(data).digest()


def chain_hash(d: bytes) -> bytes:
    """h applied to a digest; chain_hash(h(v)) = h^2(v), the public identity."""
    return one_way_hash(d)


def draw_combination(rng_state: int, n: int, size: int) -> np.ndarray:
    """Uniform sorted size-subset of [0, n) from a deterministic u64 stream."""
    from . import _kernels  # deferred: keeps analysis-only imports jit-free

    if size < 1 or size > n:
        raise ValueError(f"size {size} out of range for n={n}")
    return _kernels.combination_from_stream(rng_state, n, size)


def project(v: DiscreteEmbedding, c: np.ndarray) -> np.ndarray:
    """Bits of v at the combination's coordinates, in combination order."""
    c = np.asarray(c, dtype=np.int64)
    if c.size and (c.max() >= v.n or c.min() < 0):
        raise ValueError("combination index out of range")
    return v.to_bits()[c]


def pack_projection(bits: np.ndarray) -> bytes:
    """Canonical packed bytes of a projected bit sequence (padding zero)."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def family_hash(key: HashFamilyKey, bits: np.ndarray | bytes) -> bytes:
    """Digest of a projected bit sequence under family member iteration_index.

    `bits` may be an unpacked {0,1} sequence or already-packed bytes.
    """
    payload = bits if isinstance(bits, (bytes, bytearray, memoryview)) else pack_projection(bits)
    return hashlib.sha256(
        key.system_key + struct.pack("<I", key.iteration_index) + bytes(payload)
    ).digest()


def digest_prefix(system_key: bytes, iteration_index: int) -> bytes:
    """Precomputed hash-input prefix for one family member (hot-loop helper)."""
    return system_key + struct.pack("<I", iteration_index)
