"""Shared fixtures and the acceptance reporting hook.

The two trained-model fixtures run the full reference recipe (~8-9 minutes
each on one CPU core) and are only materialized when a requesting test runs —
the unit-test files never touch them.
"""

import pytest

from dpn_trainer.config import LAMBDA_SWEEP, TrainConfig
from dpn_trainer.data import synthetic_splits
from dpn_trainer.train import train

ACCEPTANCE_RESULTS = []


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
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f" — {detail}"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def corpus():
    return synthetic_splits(0)


@pytest.fixture(scope="session")
def trained_unreg(corpus):
    """(model, metrics rows) for the reference unregularized run."""
    return train(corpus.train, TrainConfig())


@pytest.fixture(scope="session")
def trained_reg(corpus):
    """(model, metrics rows) for the largest regularizer weight in the sweep."""
    return train(corpus.train, TrainConfig(lambda_reg=max(LAMBDA_SWEEP)))
