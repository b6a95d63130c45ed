"""Random budget schedules and synthetic utility-maximizing subjects.

Returns are drawn i.i.d. uniform on [0.1, 1] with rejection until the larger
of the pair is at least 0.5.  All randomness flows through numpy's PCG64
generator seeded explicitly, so a (seed, params) pair fully determines a
subject on every platform.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .da_model import DAParams, optimal_demand_grid
from .data import (
    Allocation,
    ChoiceRound,
    Provenance,
    ReturnPair,
    SubjectDataset,
    _parse_float,
    dataset_prefix,
    format_float,
)
from .errors import ValidationError

RETURN_LOW = 0.1
RETURN_HIGH = 1.0
RETURN_MIN_MAX = 0.5

# Fixed seed for the shared 25-round evaluation schedule used by every
# recommendation session.
EVALUATION_SCHEDULE_SEED = 251
EVALUATION_ROUNDS = 25

# Interquartile box of recovered human parameters; the default population
# sampler draws uniformly from it.  Populations produced this way are
# synthetic stand-ins, not fitted subjects.
REPRESENTATIVE_BETA_RANGE = (-0.07, 0.20)
REPRESENTATIVE_RHO_RANGE = (0.38, 0.95)


@dataclass(frozen=True)
class BudgetSchedule:
    seed: int
    rounds: tuple[ReturnPair, ...]


@dataclass(frozen=True)
class SyntheticSubject:
    subject_id: str
    params: DAParams
    dataset: SubjectDataset


def generate_budgets(seed: int, n_rounds: int) -> BudgetSchedule:
    """Rejection-sample ``n_rounds`` return pairs; deterministic per seed."""
    if n_rounds < 1:
        raise ValidationError(f"n_rounds must be >= 1, got {n_rounds}")
    rng = np.random.default_rng(seed)
    rounds = []
    while len(rounds) < n_rounds:
        r_a, r_b = rng.uniform(RETURN_LOW, RETURN_HIGH, size=2)
        if max(r_a, r_b) >= RETURN_MIN_MAX:
            rounds.append(ReturnPair(float(r_a), float(r_b)))
    return BudgetSchedule(seed, tuple(rounds))


def evaluation_schedule() -> BudgetSchedule:
    """The shared 25-round schedule on which all subjects are evaluated."""
    return generate_budgets(EVALUATION_SCHEDULE_SEED, EVALUATION_ROUNDS)


def simulate_subject(
    params: DAParams, schedule: BudgetSchedule, subject_id: str = "sim"
) -> SyntheticSubject:
    """Exact optimal choices on every budget of the schedule, in token form."""
    returns = np.array([[r.r_a, r.r_b] for r in schedule.rounds])
    prices = 1.0 / (100.0 * returns)
    demand, _, _, _ = optimal_demand_grid(prices, np.array([params.beta]), np.array([params.rho]))
    tokens = demand[0] / returns
    rounds = tuple(
        ChoiceRound.from_returns_tokens(
            i + 1, schedule.rounds[i], Allocation(float(tokens[i, 0]), float(tokens[i, 1]))
        )
        for i in range(len(schedule.rounds))
    )
    return SyntheticSubject(
        subject_id, params, SubjectDataset(subject_id, Provenance.SIMULATED, rounds)
    )


def prefix(dataset: SubjectDataset, s: int) -> SubjectDataset:
    """First ``s`` rounds; errors when s is out of range."""
    return dataset_prefix(dataset, s)


def sample_population(
    seed: int,
    n: int,
    beta_range: tuple[float, float] = REPRESENTATIVE_BETA_RANGE,
    rho_range: tuple[float, float] = REPRESENTATIVE_RHO_RANGE,
) -> list[tuple[str, DAParams]]:
    """Uniform synthetic parameter population over a (beta, rho) box."""
    rng = np.random.default_rng(seed)
    width = max(3, len(str(n)))
    out = []
    for i in range(n):
        beta = float(rng.uniform(*beta_range))
        rho = float(rng.uniform(*rho_range))
        out.append((f"sim{i + 1:0{width}d}", DAParams(beta, rho)))
    return out


PARAMS_HEADER = ["subject_id", "beta", "rho"]


def write_params_file(population: Iterable[tuple[str, DAParams]], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PARAMS_HEADER)
        for sid, params in population:
            writer.writerow([sid, format_float(params.beta), format_float(params.rho)])


def read_params_file(path: str | Path) -> list[tuple[str, DAParams]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PARAMS_HEADER:
            raise ValidationError(f"{path}: expected header {PARAMS_HEADER}, got {header!r}")
        out = []
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"row {row_num}: expected 3 fields, got {len(row)}")
            try:
                params = DAParams(
                    _parse_float(row[1], row_num, "beta"), _parse_float(row[2], row_num, "rho")
                )
            except ValidationError as exc:
                raise ValidationError(f"row {row_num}: {exc}") from None
            out.append((row[0], params))
    if not out:
        raise ValidationError(f"{path}: no subjects")
    return out


def write_schedule(schedule: BudgetSchedule, path: str | Path) -> None:
    """Export a schedule in the choice CSV schema with empty allocations."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "round", "r_a", "r_b", "t_a", "t_b"])
        for i, r in enumerate(schedule.rounds, start=1):
            writer.writerow(["schedule", i, format_float(r.r_a), format_float(r.r_b), "", ""])


def read_schedule(path: str | Path, seed: int = -1) -> BudgetSchedule:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["subject_id", "round", "r_a", "r_b", "t_a", "t_b"]:
            raise ValidationError(f"{path}: unrecognized schedule header {header!r}")
        rounds = []
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            rounds.append(
                ReturnPair(_parse_float(row[2], row_num, "r_a"), _parse_float(row[3], row_num, "r_b"))
            )
    if not rounds:
        raise ValidationError(f"{path}: no rounds")
    return BudgetSchedule(seed, tuple(rounds))
