from fractions import Fraction

import numpy as np
import pytest

from conftest import ROW2, random_embedding
from rcph.bounds import aggregate
from rcph.core import DistanceRecord, RcphParams, hamming_distance
from rcph.simlab import (
    EmpiricalStats,
    monte_carlo,
    read_fixture,
    sweep,
    synth_fixture,
    write_fixture,
    write_sweep_csv,
)


def test_fixture_zero_distance_anchor():
    fx = synth_fixture(DistanceRecord((0,), 0), n=64, seed=1)
    assert fx.anchors[0] == fx.query


def test_fixture_complement_anchor():
    fx = synth_fixture(DistanceRecord((64,), 0), n=64, seed=2)
    assert hamming_distance(fx.query, fx.anchors[0]) == 64


def test_fixture_exact_distances_row2():
    fx = synth_fixture(ROW2, n=1024, seed=3)
    got = tuple(hamming_distance(fx.query, a) for a in fx.anchors)
    assert got == ROW2.distances


def test_fixture_distance_too_large():
    with pytest.raises(ValueError):
        synth_fixture(DistanceRecord((65,), 0), n=64, seed=1)


def test_fixture_requires_truth():
    with pytest.raises(ValueError):
        synth_fixture(DistanceRecord((5,), None), n=64, seed=1)


def test_fixture_deterministic():
    a = synth_fixture(ROW2, n=256, seed=9)
    b = synth_fixture(ROW2, n=256, seed=9)
    assert a.query == b.query and a.anchors == b.anchors


def test_monte_carlo_exact_match_every_trial():
    fx = synth_fixture(DistanceRecord((0, 5, 9), 0), n=64, seed=4)
    st = monte_carlo(fx, RcphParams(p=Fraction(1), m=16, n=64, k=3), trials=50, seed=5)
    assert st.correct_rate == 1.0
    assert st.mean_iterations == 1.0
    assert st.wrong_rate == st.abstain_rate == 0.0


def test_monte_carlo_rates_sum_to_one():
    fx = synth_fixture(DistanceRecord((3, 9), 0), n=32, seed=6)
    st = monte_carlo(fx, RcphParams(p=Fraction(1, 2), m=4, n=32, k=2), trials=120, seed=7)
    assert st.correct_rate + st.wrong_rate + st.abstain_rate == pytest.approx(1.0)
    assert st.mean_iterations <= 4.0
    assert st.trials == 120


def test_monte_carlo_reproducible():
    fx = synth_fixture(DistanceRecord((3, 9), 0), n=32, seed=8)
    params = RcphParams(p=Fraction(1, 2), m=4, n=32, k=2)
    assert monte_carlo(fx, params, 100, seed=9) == monte_carlo(fx, params, 100, seed=9)


def test_monte_carlo_seed_matters():
    fx = synth_fixture(DistanceRecord((3, 9), 0), n=32, seed=8)
    params = RcphParams(p=Fraction(1, 2), m=4, n=32, k=2)
    a = monte_carlo(fx, params, 200, seed=1)
    b = monte_carlo(fx, params, 200, seed=2)
    assert a != b  # same distribution, different draw


def test_sweep_single_cell_equals_aggregate(ten_way_rows):
    rows = sweep(ten_way_rows, [Fraction(1, 2)], [10_000])
    assert len(rows) == 1
    p, m, acc, fail, comp = rows[0]
    agg = aggregate(ten_way_rows, RcphParams(p=Fraction(1, 2), m=10_000, n=1024, k=10))
    assert (acc, fail, comp) == (
        agg.accuracy_lower,
        agg.fail_upper,
        agg.expected_iterations_upper,
    )


def test_sweep_monotone_in_m(ten_way_rows):
    ms = [10, 100, 1000, 10_000, 100_000]
    rows = sweep(ten_way_rows, [Fraction(1, 2)], ms)
    accs = [r[2] for r in rows]
    fails = [r[3] for r in rows]
    assert accs == sorted(accs)
    assert fails == sorted(fails)


def test_sweep_grid_shape(ten_way_rows):
    rows = sweep(ten_way_rows, [Fraction(1, 4), Fraction(1, 2)], [100, 1000])
    assert [(r[0], r[1]) for r in rows] == [
        (0.25, 100),
        (0.25, 1000),
        (0.5, 100),
        (0.5, 1000),
    ]


def test_sweep_empty_inputs(ten_way_rows):
    with pytest.raises(ValueError):
        sweep([], [Fraction(1, 2)], [10])
    with pytest.raises(ValueError):
        sweep(ten_way_rows, [], [10])


def test_sweep_csv(tmp_path, ten_way_rows):
    rows = sweep(ten_way_rows, [Fraction(1, 2)], [100])
    path = tmp_path / "s.csv"
    write_sweep_csv(path, rows)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "p,m,accuracy,fail,complexity"
    assert len(lines) == 2


def test_fixture_file_round_trip(tmp_path):
    fx = synth_fixture(DistanceRecord((2, 7, 11), 1), n=64, seed=10)
    path = tmp_path / "f.demb"
    write_fixture(path, fx)
    back = read_fixture(path)
    assert back.query == fx.query
    assert back.anchors == fx.anchors
    assert back.record == fx.record
