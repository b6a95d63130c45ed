from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from prefbench.data import ChoiceRound, PricePair, Provenance, SubjectDataset

settings.register_profile(
    "ci", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")

# One "PASS/FAIL" line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def dataset_from_prices(rows, subject_id="s", provenance=Provenance.HUMAN) -> SubjectDataset:
    """Rows of (p_a, p_b, x_a, x_b) -> validated dataset."""
    rounds = tuple(
        ChoiceRound.from_prices_demand(i + 1, PricePair(p_a, p_b), (x_a, x_b))
        for i, (p_a, p_b, x_a, x_b) in enumerate(rows)
    )
    return SubjectDataset(subject_id, provenance, rounds)


@pytest.fixture
def crossing_dataset() -> SubjectDataset:
    """Two mutually revealed-preferred observations with CCEI exactly 0.5."""
    return dataset_from_prices([(1.0, 1.0, 1.0, 0.0), (0.5, 2.0, 0.0, 0.5)])


def random_sloppy_dataset(rng: np.random.Generator, n_rounds: int) -> SubjectDataset:
    """Random budgets with behaviorally arbitrary (often irrational) choices."""
    rows = []
    for _ in range(n_rounds):
        p = rng.uniform(0.005, 0.05, size=2)
        share = rng.uniform(0.0, 1.0)
        rows.append((p[0], p[1], share / p[0], (1.0 - share) / p[1]))
    return dataset_from_prices(rows)
