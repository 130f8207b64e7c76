"""Acceptance gate: one reported pass/fail line per criterion.

All three criteria run against the same deterministic reference recipe
(the ``TrainConfig`` defaults, seed 0, on the seed-0 synthetic corpus), so
a green run here reproduces bit-identical numbers on the same machine.
The end-to-end criterion consumes the matching toolkit strictly through its
command line and file formats — nothing from that package is imported.
"""

import subprocess
import sys

import numpy as np

from conftest import record_acceptance
from dpn_trainer.config import EpisodeSpec, TrainConfig
from dpn_trainer.export import episode_distance_rows, write_distance_csv
from dpn_trainer.train import evaluate_discrete

EVAL_5WAY = EpisodeSpec(way=5, shot=1, queries=5)
EVAL_20WAY = EpisodeSpec(way=20, shot=1, queries=5)
EVAL_20WAY_5SHOT = EpisodeSpec(way=20, shot=5, queries=5)


def test_s01_discrete_fewshot_accuracy(corpus, trained_unreg):
    """20-way 1-shot >= 0.85 and 5-way 1-shot >= 0.93 on rounded embeddings,
    plus the expected ordering trends between evaluation settings."""
    model, _ = trained_unreg
    a20 = evaluate_discrete(model, corpus.test, EVAL_20WAY, 30, seed=1)
    a5 = evaluate_discrete(model, corpus.test, EVAL_5WAY, 60, seed=2)
    a20s5 = evaluate_discrete(model, corpus.test, EVAL_20WAY_5SHOT, 30, seed=1)
    ok = (a20 >= 0.85 and a5 >= 0.93
          and a5 >= a20            # fewer classes is the easier task
          and a20s5 >= 0.85)       # more anchors stays above the 1-shot floor
    record_acceptance(
        "few-shot discrete accuracy", ok,
        f"20-way 1-shot {a20:.4f} (>= 0.85), 5-way 1-shot {a5:.4f} "
        f"(>= 0.93), 20-way 5-shot {a20s5:.4f}")


def test_s02_gap_trajectory(trained_unreg, trained_reg):
    """Gap starts at 0.21 +/- 0.04, ends <= 0.12 unregularized, and the
    largest regularizer weight ends at or below the unregularized final."""
    _, rows = trained_unreg
    _, reg_rows = trained_reg
    per_epoch = TrainConfig().batches_per_epoch
    start = rows[0].gap
    final = float(np.mean([r.gap for r in rows[-per_epoch:]]))
    reg_final = float(np.mean([r.gap for r in reg_rows[-per_epoch:]]))
    ok = abs(start - 0.21) <= 0.04 and final <= 0.12 and reg_final <= final
    record_acceptance(
        "discretization gap trajectory", ok,
        f"start {start:.4f} (0.21 +/- 0.04), unregularized final-epoch mean "
        f"{final:.4f} (<= 0.12), largest-lambda final {reg_final:.4f} "
        f"(<= unregularized)")


def _toolkit(*args) -> list[str]:
    proc = subprocess.run(
        [sys.executable, "-m", "rcph.cli", *args],
        capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout.strip().splitlines()


def test_s03_end_to_end_pipeline(corpus, trained_unreg, tmp_path):
    """Exported validation matrices drive the toolkit's best-p search to
    p* = 0.09 +/- 0.04 at m=10^4, and the test-set aggregate accuracy bound
    at that p* lands within 5 points of 0.896."""
    model, _ = trained_unreg

    val_csv = tmp_path / "val_5way.csv"
    write_distance_csv(
        val_csv, episode_distance_rows(model, corpus.val, EVAL_5WAY, 40, seed=3))
    winner = _toolkit("best-p", "--dist-matrix", str(val_csv),
                      "--m", "10000")[-1].split(",")
    p_star = float(winner[0])

    test_csv = tmp_path / "test_5way.csv"
    write_distance_csv(
        test_csv, episode_distance_rows(model, corpus.test, EVAL_5WAY, 40, seed=4))
    aggregate_row = _toolkit("analyze", "--dist-matrix", str(test_csv),
                             "--p", winner[0], "--m", "10000")[-1].split(",")
    assert aggregate_row[0] == "aggregate"
    aggregate = float(aggregate_row[1])

    ok = abs(p_star - 0.09) <= 0.04 and 0.846 <= aggregate <= 0.946
    record_acceptance(
        "end-to-end pipeline", ok,
        f"p* {p_star} (0.09 +/- 0.04), test aggregate accuracy bound "
        f"{aggregate:.4f} (0.896 +/- 0.05)")
