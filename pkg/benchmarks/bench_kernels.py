#!/usr/bin/env python3
"""Benchmark the numba and numpy kernel backends against each other.

Runs the combination sampler, the projection packer, and the fused
sample+pack path on both backends (same inputs, bit-identical outputs), plus
an end-to-end preprocess+query trial, and prints a per-op table.

Usage: python benchmarks/bench_kernels.py [--n 1024] [--k 10] [--m 100]
       [--repeat 20]

Force a backend for the end-to-end row with RCPH_BACKEND; the per-op rows
always measure both implementations directly.
"""

import argparse
import time

import numpy as np

from rcph import _kernels
from rcph._kernels import (
    HAS_NUMBA,
    _combinations_np,
    _pack_np,
    iteration_streams,
)


def timeit(fn, repeat):
    fn()  # warm (jit compile / cache load)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    n, k, m = args.n, args.k, args.m
    s = n // 2

    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, (k, n), dtype=np.uint8)
    streams = iteration_streams(12345, m)
    combs = _combinations_np(streams, n, s)

    rows = []

    rows.append(("sample (numpy)", timeit(lambda: _combinations_np(streams, n, s), args.repeat)))
    rows.append(("pack (numpy)", timeit(lambda: _pack_np(bits, combs), args.repeat)))

    if HAS_NUMBA:
        from rcph._kernels import _build_nb, _pack_only_nb

        def run_fused():
            c = np.empty((m, s), np.int64)
            p = np.zeros((k, m, (s + 7) // 8), np.uint8)
            _build_nb(streams, n, s, bits, c, p)
            return c, p

        def run_pack_nb():
            p = np.zeros((k, m, (s + 7) // 8), np.uint8)
            _pack_only_nb(bits, combs, p)
            return p

        rows.append(("pack (numba)", timeit(run_pack_nb, args.repeat)))
        rows.append(("sample+pack fused (numba)", timeit(run_fused, args.repeat)))

        c_nb, p_nb = run_fused()
        assert np.array_equal(c_nb, combs), "backends disagree on combinations"
        assert np.array_equal(p_nb, _pack_np(bits, combs)), "backends disagree on packing"
        two_step = timeit(lambda: _combinations_np(streams, n, s), 5) + timeit(
            lambda: _pack_np(bits, combs), 5
        )
        rows.append(("sample+pack two-step (numpy)", two_step))
    else:
        rows.append(("numba backend", None))

    # end-to-end trial on whichever backend is active
    from fractions import Fraction

    from rcph import engine, simlab
    from rcph.core import DistanceRecord, RcphParams

    rec = DistanceRecord(tuple(rng.integers(5, n // 3, k)), 0)
    fx = simlab.synth_fixture(rec, n, 7)
    params = RcphParams(p=Fraction(1, 2), m=m, n=n, k=k)

    def trial():
        idx = engine.preprocess(list(fx.anchors), params, 1)
        engine.query(idx, fx.query)

    rows.append((f"preprocess+query ({_kernels.backend()})", timeit(trial, args.repeat)))

    width = max(len(name) for name, _ in rows)
    print(f"n={n} k={k} m={m} s={s}  backend={_kernels.backend()}")
    for name, dt in rows:
        if dt is None:
            print(f"{name:<{width}}  unavailable")
        else:
            print(f"{name:<{width}}  {dt * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()
