"""Shared fixtures and helpers for the test suite."""

from fractions import Fraction

import numpy as np
import pytest

from rcph.core import DistanceRecord, RcphParams, pack_bits

# the 10-way reference rows shipped in rcph/data/distances_10way.csv
ROW1 = DistanceRecord((7, 35, 50, 28, 34, 45, 28, 31, 49, 37), 0)
ROW2 = DistanceRecord((36, 50, 47, 15, 37, 48, 25, 46, 36, 42), 3)
ROW3 = DistanceRecord((36, 25, 30, 38, 26, 39, 21, 30, 32, 26), 2)
REFERENCE_ROWS = (ROW1, ROW2, ROW3)


@pytest.fixture
def ten_way_rows():
    return REFERENCE_ROWS


@pytest.fixture
def half_params():
    return RcphParams(p=Fraction(1, 2), m=10_000, n=1024, k=10)


def random_embedding(rng: np.random.Generator, n: int):
    return pack_bits(rng.integers(0, 2, n, dtype=np.uint8))


def bit_string(data: bytes, order: str) -> str:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder=order)
    return "".join("1" if b else "0" for b in bits)


def contains_bit_substring(haystack: bytes, needle_bits: np.ndarray) -> bool:
    """True if the needle bit pattern occurs contiguously at ANY bit offset,
    under either bit order and either direction."""
    needle = "".join("1" if b else "0" for b in needle_bits)
    needles = (needle, needle[::-1])
    return any(
        nd in bit_string(haystack, order)
        for order in ("little", "big")
        for nd in needles
    )


# -------------------------------------------------- acceptance result report

ACCEPTANCE_RESULTS: list = []


def record_acceptance(name: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, ok, detail))
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" — {detail}"
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f" — {detail}"
        tr.write_line(line)
