"""Analytic performance bounds for hashed-projection matching.

For a query at Hamming distance d from an anchor, one random size-s coordinate
combination avoids all d differing coordinates — and therefore produces a
digest hit on that anchor — with probability

    R(d) = C(n-d, s) / C(n, s) = prod_{j=0}^{d-1} (n-s-j) / (n-j),

the telescoping product being exact to machine precision where the binomials
themselves overflow any fixed-width integer. From per-anchor ratios R(v_i) we
form per-iteration event probabilities and geometric-series bounds over m
iterations:

    accuracy_lower = E_sc * G,   fail_upper = E_w_upper * G,
    G(q) = (1 - q^m) / (1 - q),  q = max(0, 1 - sum_i R(v_i)),
    expected_iterations_upper = min(1/lambda, m),  lambda = max_i R(v_i),

where E_c = R(v_y), E_w_upper = sum_{i != y} R(v_i) (union bound),
E_w_lower = max_{i != y} R(v_i), and E_sc = max(0, E_c - E_w_upper) bounds a
*single correct* match in one iteration. q is the no-match probability's lower
bound; using it inside G for both the accuracy and fail series is a fixed
convention of this module (see the module's reference values in the tests).

The same q-in-G convention, with everything clamped to [0, 1], reproduces the
shipped 10-way reference table to within 1e-3 per cell, except one documented
cell — see tests/test_acceptance.py.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from math import comb, expm1, log
from typing import Optional, Sequence

from .core import DEFAULT_N, DistanceRecord, FormatError, RcphParams


def hyper_ratio(n: int, d: int, s: int) -> float:
    """Probability that a uniform s-subset of [0, n) avoids d marked coordinates.

    Equals C(n-d, s)/C(n, s); 0 when d > n - s; strictly decreasing in d while
    positive.
    """
    if not 0 <= d <= n:
        raise ValueError(f"d={d} out of range [0, {n}]")
    if not 1 <= s <= n:
        raise ValueError(f"s={s} out of range [1, {n}]")
    r = 1.0
    for j in range(d):
        num = n - s - j
        if num <= 0:
            return 0.0
        r *= num / (n - j)
    return r


def hyper_ratio_exact(n: int, d: int, s: int) -> Fraction:
    """Exact rational value of hyper_ratio, for small-n oracle checks."""
    if not 0 <= d <= n:
        raise ValueError(f"d={d} out of range [0, {n}]")
    if not 1 <= s <= n:
        raise ValueError(f"s={s} out of range [1, {n}]")
    if d > n - s:
        return Fraction(0)
    return Fraction(comb(n - d, s), comb(n, s))


@dataclass(frozen=True)
class EventProbabilities:
    """Per-iteration event probabilities for one distance record."""

    pr_correct: float
    pr_wrong_lower: float
    pr_wrong_upper: float
    pr_nomatch_lower: float
    pr_nomatch_upper: float
    pr_single_correct_lower: float
    lam: float  # max_i R(v_i); 1/lam is the expected-iterations scale


@dataclass(frozen=True)
class PerformanceBounds:
    """Correct-match lower bound, wrong-match upper bound, iteration bound."""

    accuracy_lower: float
    fail_upper: float
    expected_iterations_upper: float


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def event_probs(record: DistanceRecord, params: RcphParams) -> EventProbabilities:
    """Per-iteration probabilities from a record's anchor distances."""
    if record.correct_index is None:
        raise ValueError("record has no correct_index")
    n, s, y = params.n, params.s, record.correct_index
    ratios = [hyper_ratio(n, d, s) for d in record.distances]
    wrong = [r for i, r in enumerate(ratios) if i != y]
    pr_correct = ratios[y]
    pr_wrong_upper = _clamp01(sum(wrong))
    pr_wrong_lower = max(wrong, default=0.0)
    pr_nomatch_upper = _clamp01(1.0 - max(ratios))
    pr_nomatch_lower = _clamp01(1.0 - sum(ratios))
    return EventProbabilities(
        pr_correct=pr_correct,
        pr_wrong_lower=pr_wrong_lower,
        pr_wrong_upper=pr_wrong_upper,
        pr_nomatch_lower=pr_nomatch_lower,
        pr_nomatch_upper=pr_nomatch_upper,
        pr_single_correct_lower=max(0.0, pr_correct - pr_wrong_upper),
        lam=max(ratios),
    )


def geometric_multiplier(q: float, m: int) -> float:
    """G(q) = (1 - q^m)/(1 - q), the expected number of decisive iterations.

    Stable at both ends: q -> 1 gives m, q -> 0 gives 1. Near q = 1 the naive
    quotient cancels catastrophically, so both numerator and denominator go
    through expm1/log.
    """
    if q >= 1.0:
        return float(m)
    if q <= 0.0:
        return 1.0
    lq = log(q)
    num = -expm1(m * lq)
    if 1.0 - q < 1e-12:
        return num / -expm1(lq)
    return num / (1.0 - q)


def performance_bounds(record: DistanceRecord, params: RcphParams) -> PerformanceBounds:
    """Whole-run bounds over m iterations for one record."""
    ev = event_probs(record, params)
    g = geometric_multiplier(ev.pr_nomatch_lower, params.m)
    lam = ev.lam
    comp = float(params.m) if lam <= 0.0 else min(1.0 / lam, float(params.m))
    return PerformanceBounds(
        accuracy_lower=_clamp01(ev.pr_single_correct_lower * g),
        fail_upper=_clamp01(ev.pr_wrong_upper * g),
        expected_iterations_upper=comp,
    )


def aggregate(records: Sequence[DistanceRecord], params: RcphParams) -> PerformanceBounds:
    """Mean of per-record bounds over a query set."""
    if not records:
        raise ValueError("no records")
    bs = [performance_bounds(r, params) for r in records]
    inv = 1.0 / len(bs)
    return PerformanceBounds(
        accuracy_lower=sum(b.accuracy_lower for b in bs) * inv,
        fail_upper=sum(b.fail_upper for b in bs) * inv,
        expected_iterations_upper=sum(b.expected_iterations_upper for b in bs) * inv,
    )


DEFAULT_P_GRID: tuple = tuple(Fraction(i, 100) for i in range(1, 51))


def best_p(
    records: Sequence[DistanceRecord],
    m: int,
    p_grid: Optional[Sequence[Fraction]] = None,
    n: int = DEFAULT_N,
):
    """Grid p maximizing aggregate accuracy_lower; ties go to the larger p.

    Returns (p_star, aggregate bounds at p_star). Grid entries whose
    floor(p*n) is 0 are skipped.
    """
    if not records:
        raise ValueError("no records")
    grid = [Fraction(p) for p in (p_grid if p_grid is not None else DEFAULT_P_GRID)]
    if not grid:
        raise ValueError("empty p grid")
    k = records[0].k
    best = None
    for p in grid:
        if (p.numerator * n) // p.denominator < 1:
            continue
        agg = aggregate(records, RcphParams(p=p, m=m, n=n, k=k))
        # ties toward larger p: >= when p is larger, > otherwise
        if best is None or agg.accuracy_lower > best[1].accuracy_lower or (
            agg.accuracy_lower == best[1].accuracy_lower and p > best[0]
        ):
            best = (p, agg)
    if best is None:
        raise ValueError("no feasible p in grid (floor(p*n) always 0)")
    return best


# ------------------------------------------------------- distance-matrix CSV

def read_distance_csv(path) -> list[DistanceRecord]:
    """Read records: k distance columns plus a final correct-index column.

    A correct index of -1 means unknown.
    """
    out = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), 1):
            row = [c.strip() for c in row if c.strip() != ""]
            if not row:
                continue
            try:
                nums = [int(c) for c in row]
            except ValueError as e:
                raise FormatError(f"line {lineno}: non-integer field") from e
            if len(nums) < 2:
                raise FormatError(f"line {lineno}: need k distances + correct index")
            *dists, correct = nums
            try:
                out.append(
                    DistanceRecord(tuple(dists), None if correct == -1 else correct)
                )
            except ValueError as e:
                raise FormatError(f"line {lineno}: {e}") from e
    if not out:
        raise FormatError("no records in distance matrix")
    if len({r.k for r in out}) != 1:
        raise FormatError("rows have differing k")
    return out


def write_distance_csv(path, records: Sequence[DistanceRecord]) -> None:
    """Inverse of read_distance_csv."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for r in records:
            y = -1 if r.correct_index is None else r.correct_index
            w.writerow(list(r.distances) + [y])
