"""Hot kernels: coordinate sampling and projection packing.

Two interchangeable backends produce bit-identical results:

* ``numba`` — jit-compiled fused kernel (default when numba is importable);
* ``numpy`` — vectorized fallback.

Selection: set ``RCPH_BACKEND=numpy`` or ``RCPH_BACKEND=numba`` to force one;
unset picks numba when available. ``benchmarks/bench_kernels.py`` times both.

Sampling scheme
---------------
For iteration stream ``d`` (a u64, see ``_rng``), coordinate ``t`` of ``[0,n)``
gets key ``mix64(d + GOLDEN*(t+1))``. The combination is the ``s`` coordinates
with the smallest keys — a uniform s-subset — emitted in ascending coordinate
order. Ties on the threshold key (probability ~n^2/2^64) resolve to the
lowest coordinates, identically in both backends.
"""

from __future__ import annotations

import os

import numpy as np

from ._rng import GOLDEN, MASK64, derive_array, mix64, mix64_array

_FLAG = os.environ.get("RCPH_BACKEND", "").strip().lower()
if _FLAG not in ("", "auto", "numpy", "numba"):
    raise RuntimeError(f"RCPH_BACKEND must be 'numpy' or 'numba', got {_FLAG!r}")

if _FLAG == "numpy":
    HAS_NUMBA = False
else:
    try:
        from numba import njit, uint8, uint64

        HAS_NUMBA = True
    except ImportError:
        if _FLAG == "numba":
            raise
        HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def backend() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return BACKEND


def iteration_streams(seed: int, m: int) -> np.ndarray:
    """Per-iteration u64 streams; a prefix of the m+1 array equals the m array."""
    return derive_array(seed, m)


def retry_stream(stream: int, retry: int) -> int:
    """Redraw stream for a collision retry (retry >= 1); retry 0 is the original."""
    stream = int(stream) & MASK64
    if retry == 0:
        return stream
    return mix64((stream + retry) & MASK64)


# ---------------------------------------------------------------- numpy backend

def _coordinate_keys_np(streams: np.ndarray, n: int) -> np.ndarray:
    t = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_array(streams[:, None] + np.uint64(GOLDEN) * t[None, :])


def _select_smallest(keys: np.ndarray, s: int) -> np.ndarray:
    # per row: the first s indices whose key <= the s-th smallest key, in
    # index order — identical to the jit kernel's walk, including on ties
    m = keys.shape[0]
    kth = np.partition(keys, s - 1, axis=1)[:, s - 1]
    mask = keys <= kth[:, None]
    counts = mask.sum(axis=1)
    _, cols = np.nonzero(mask)
    if counts.max(initial=s) == s:
        return cols.reshape(m, s).astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(counts[:-1])))
    rank = np.arange(cols.size) - np.repeat(starts, counts)
    return cols[rank < s].reshape(m, s).astype(np.int64)


def _combinations_np(streams: np.ndarray, n: int, s: int) -> np.ndarray:
    return _select_smallest(_coordinate_keys_np(streams, n), s)


def _pack_np(bits: np.ndarray, combs: np.ndarray) -> np.ndarray:
    # bits (k, n) uint8 in {0,1}; combs (m, s) -> packed (k, m, ceil(s/8))
    return np.packbits(bits[:, combs], axis=-1, bitorder="little")


# ---------------------------------------------------------------- numba backend

if HAS_NUMBA:

    @njit(cache=True)
    def _mix64_nb(x):
        z = uint64(x + uint64(0x9E3779B97F4A7C15))
        z = uint64((z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9))
        z = uint64((z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB))
        return uint64(z ^ (z >> uint64(31)))

    @njit(cache=True)
    def _build_nb(streams, n, s, bits, combs, packed):
        # streams (m,) u64; bits (k, n) u8 -> combs (m, s), packed (k, m, bpc)
        k = bits.shape[0]
        m = streams.shape[0]
        keys = np.empty(n, np.uint64)
        for i in range(m):
            d = streams[i]
            for t in range(n):
                keys[t] = _mix64_nb(uint64(d) + uint64(0x9E3779B97F4A7C15) * uint64(t + 1))
            kth = np.partition(keys.copy(), s - 1)[s - 1]
            c = 0
            for idx in range(n):
                if keys[idx] <= kth and c < s:
                    combs[i, c] = idx
                    byte = c >> 3
                    bit = uint8(1 << (c & 7))
                    for a in range(k):
                        if bits[a, idx]:
                            packed[a, i, byte] |= bit
                    c += 1

    @njit(cache=True)
    def _pack_only_nb(bits, combs, packed):
        # bits (k, n) u8; combs (m, s) -> packed (k, m, bpc), preallocated zero
        k = bits.shape[0]
        m, s = combs.shape
        for i in range(m):
            for c in range(s):
                idx = combs[i, c]
                byte = c >> 3
                bit = uint8(1 << (c & 7))
                for a in range(k):
                    if bits[a, idx]:
                        packed[a, i, byte] |= bit


# ---------------------------------------------------------------- public API

def combinations_from_streams(streams: np.ndarray, n: int, s: int) -> np.ndarray:
    """Sorted s-subsets of [0, n) for each stream, shape (m, s) int64."""
    if not 1 <= s <= n:
        raise ValueError(f"subset size {s} out of range for n={n}")
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    if HAS_NUMBA:
        m = streams.shape[0]
        combs = np.empty((m, s), np.int64)
        packed = np.zeros((0, m, (s + 7) // 8), np.uint8)
        _build_nb(streams, n, s, np.zeros((0, n), np.uint8), combs, packed)
        return combs
    return _combinations_np(streams, n, s)


def combination_from_stream(stream: int, n: int, s: int) -> np.ndarray:
    """Single sorted s-subset for one stream, shape (s,) int64."""
    return combinations_from_streams(np.array([stream & MASK64], np.uint64), n, s)[0]


def pack_projections(bits: np.ndarray, combs: np.ndarray) -> np.ndarray:
    """Project rows of `bits` (k, n) through each combination and pack.

    Returns (k, m, ceil(s/8)) uint8, little-endian bit order, padding zero.
    """
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    combs = np.ascontiguousarray(combs, dtype=np.int64)
    if HAS_NUMBA:
        k = bits.shape[0]
        m, s = combs.shape
        packed = np.zeros((k, m, (s + 7) // 8), np.uint8)
        _pack_only_nb(bits, combs, packed)
        return packed
    return _pack_np(bits, combs)


def build_projections(streams: np.ndarray, n: int, s: int, bits: np.ndarray):
    """Fused sample + project + pack for all iterations.

    Returns (combs (m, s) int64, packed (k, m, ceil(s/8)) uint8). Equivalent to
    ``combinations_from_streams`` followed by ``pack_projections`` but one pass
    on the numba backend.
    """
    if not 1 <= s <= n:
        raise ValueError(f"subset size {s} out of range for n={n}")
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    if HAS_NUMBA:
        k = bits.shape[0]
        m = streams.shape[0]
        combs = np.empty((m, s), np.int64)
        packed = np.zeros((k, m, (s + 7) // 8), np.uint8)
        _build_nb(streams, n, s, bits, combs, packed)
        return combs, packed
    combs = _combinations_np(streams, n, s)
    return combs, _pack_np(bits, combs)
