"""Synthetic fixtures with exact prescribed distances, Monte-Carlo validation
of the analytic bounds, and (p, m) sweep surfaces.

A fixture realizes a distance record as concrete vectors: the query is drawn
uniformly, then anchor i is the query with exactly distances[i] distinct
coordinates flipped. Flips are sampled independently per anchor — inter-anchor
distances are random, which is fine because every bound depends only on
query-to-anchor distances.

Monte-Carlo runs the real engine (preprocess + query) once per trial under
per-trial derived seeds, so empirical rates exercise the full pipeline, not a
shortcut model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._rng import derive_array
from .bounds import aggregate
from .core import (
    DiscreteEmbedding,
    DistanceRecord,
    RcphParams,
    distance_record,
    pack_bits,
    read_embeddings,
    write_embeddings,
)
from .engine import preprocess, query


@dataclass(frozen=True)
class SyntheticFixture:
    """Concrete anchors + query realizing a distance record."""

    anchors: tuple
    query: DiscreteEmbedding
    record: DistanceRecord
    seed: int


@dataclass(frozen=True)
class EmpiricalStats:
    """Outcome rates over repeated preprocess+query trials."""

    trials: int
    correct_rate: float
    wrong_rate: float
    abstain_rate: float
    mean_iterations: float
    se_correct: float
    se_wrong: float
    se_abstain: float


def synth_fixture(record: DistanceRecord, n: int, seed: int) -> SyntheticFixture:
    """Build vectors at the record's exact distances, deterministically."""
    if record.correct_index is None:
        raise ValueError("record needs a correct_index")
    if max(record.distances) > n:
        raise ValueError(f"distance {max(record.distances)} > n={n}")
    rng = np.random.default_rng(seed)
    qbits = rng.integers(0, 2, n, dtype=np.uint8)
    anchors = []
    for d in record.distances:
        abits = qbits.copy()
        flips = rng.permutation(n)[:d]
        abits[flips] ^= 1
        anchors.append(pack_bits(abits))
    return SyntheticFixture(
        anchors=tuple(anchors), query=pack_bits(qbits), record=record, seed=seed
    )


def monte_carlo(
    fixture: SyntheticFixture, params: RcphParams, trials: int, seed: int
) -> EmpiricalStats:
    """Empirical outcome rates: full preprocess + query per trial."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    anchors = list(fixture.anchors)
    probe = fixture.query
    y = fixture.record.correct_index
    trial_seeds = derive_array(seed, trials)
    n_correct = n_wrong = 0
    iter_sum = 0
    for t in range(trials):
        idx = preprocess(anchors, params, int(trial_seeds[t]))
        out = query(idx, probe)
        iter_sum += out.iterations_used
        if out.is_match:
            if out.class_index == y:
                n_correct += 1
            else:
                n_wrong += 1
    n_abstain = trials - n_correct - n_wrong

    def rate_se(c):
        r = c / trials
        return r, math.sqrt(r * (1.0 - r) / trials)

    rc, sec = rate_se(n_correct)
    rw, sew = rate_se(n_wrong)
    ra, sea = rate_se(n_abstain)
    return EmpiricalStats(
        trials=trials,
        correct_rate=rc,
        wrong_rate=rw,
        abstain_rate=ra,
        mean_iterations=iter_sum / trials,
        se_correct=sec,
        se_wrong=sew,
        se_abstain=sea,
    )


def sweep(
    records: Sequence[DistanceRecord],
    p_grid: Sequence[Fraction],
    m_grid: Sequence[int],
    n: int = 1024,
) -> list[tuple]:
    """Aggregate bounds per (p, m) cell: rows of (p, m, accuracy, fail, complexity)."""
    if not records or not p_grid or not m_grid:
        raise ValueError("records, p_grid and m_grid must be nonempty")
    k = records[0].k
    rows = []
    for p in p_grid:
        for m in m_grid:
            agg = aggregate(records, RcphParams(p=Fraction(p), m=int(m), n=n, k=k))
            rows.append(
                (
                    float(p),
                    int(m),
                    agg.accuracy_lower,
                    agg.fail_upper,
                    agg.expected_iterations_upper,
                )
            )
    return rows


def write_sweep_csv(path, rows: Sequence[tuple]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["p", "m", "accuracy", "fail", "complexity"])
        for r in rows:
            w.writerow([repr(r[0]), r[1], repr(r[2]), repr(r[3]), repr(r[4])])


# ------------------------------------------------------------- fixture files

def write_fixture(path, fixture: SyntheticFixture) -> None:
    """Fixture as an embedding file: record 0 is the query labeled with the
    correct index, then the k anchors labeled 0..k-1."""
    recs = [(fixture.record.correct_index, fixture.query)]
    recs += [(i, a) for i, a in enumerate(fixture.anchors)]
    write_embeddings(path, recs)


def read_fixture(path) -> SyntheticFixture:
    recs = read_embeddings(path)
    if len(recs) < 2:
        raise ValueError("fixture file needs a query and at least one anchor")
    correct, probe = recs[0]
    anchors = tuple(e for _, e in recs[1:])
    rec = distance_record(probe, anchors, correct)
    return SyntheticFixture(anchors=anchors, query=probe, record=rec, seed=0)
