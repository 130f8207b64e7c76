"""Deterministic 64-bit stream derivation (splitmix64).

Every randomized component in this package draws from splitmix64 streams so
that results are reproducible bit-for-bit from a single u64 seed, and so that
numerically identical streams can be generated from scalar Python code, numpy
vector code, and jit-compiled kernels alike.

A "stream" is just a u64 state; child streams are derived by mixing the parent
state with a counter, which gives independent-behaving streams without any
sequential dependency (important for parallel trials).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_G = np.uint64(GOLDEN)
_NM1 = np.uint64(_M1)
_NM2 = np.uint64(_M2)


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int (mod 2^64)."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer on a uint64 array."""
    with np.errstate(over="ignore"):
        z = x + _G
        z = (z ^ (z >> np.uint64(30))) * _NM1
        z = (z ^ (z >> np.uint64(27))) * _NM2
        return z ^ (z >> np.uint64(31))


def derive(seed: int, index: int) -> int:
    """Child stream `index` of `seed`; distinct indices give independent streams."""
    return mix64((seed + GOLDEN * (index + 1)) & MASK64)


def derive_array(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Child streams start..start+count-1 of `seed` as a uint64 array."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_array(np.uint64(seed & MASK64) + _G * idx)
