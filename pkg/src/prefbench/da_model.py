"""Disappointment-averse utility over two equally likely states, with exact demand.

The preference functional over a bundle ``(x_a, x_b)`` is

    U(x) = w * u(max(x_a, x_b)) + (1 - w) * u(min(x_a, x_b)),   w = 1/(2 + beta),

with CRRA felicity ``u(x) = (x^(1-rho) - 1) / (1 - rho)`` (log at rho = 1).
``beta > 0`` overweights the worse outcome (disappointment aversion),
``beta < 0`` the better one (elation seeking), ``beta = 0`` is expected utility.

On a budget line the objective is kinked at ``x_a = x_b``, so the maximizer is
found by enumerating the full candidate set rather than by smooth first-order
conditions: the two one-sided interior branches, the kink bundle, and (for
rho < 1 only, where zero wealth has finite felicity) the two corners.  Exact
utility ties are broken deterministically -- kink first, then the candidate
with the larger ``x_a`` -- and flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import PricePair
from .errors import ValidationError

_LOG_RHO_EPS = 1e-10


@dataclass(frozen=True)
class DAParams:
    """Disappointment-aversion parameter ``beta`` and risk aversion ``rho``."""

    beta: float
    rho: float

    def __post_init__(self):
        if not self.beta > -1.0:
            raise ValidationError(f"beta must exceed -1, got {self.beta}")
        if not self.rho > 0.0:
            raise ValidationError(f"rho must be positive, got {self.rho}")

    @property
    def weight(self) -> float:
        """Decision weight on the better outcome, 1/(2 + beta) in (0, 1)."""
        return 1.0 / (2.0 + self.beta)


class Branch(str, Enum):
    INTERIOR_A_HIGH = "interior_A_high"
    INTERIOR_B_HIGH = "interior_B_high"
    KINK = "kink"
    CORNER_A = "corner_A"
    CORNER_B = "corner_B"


_BRANCHES = (Branch.KINK, Branch.INTERIOR_A_HIGH, Branch.CORNER_A,
             Branch.INTERIOR_B_HIGH, Branch.CORNER_B)


@dataclass(frozen=True)
class DemandSolution:
    demand: tuple[float, float]
    branch: Branch
    utility: float
    tie: bool = False


def crra(x: float, rho: float) -> float:
    """CRRA felicity; log branch within 1e-10 of rho = 1; -inf at x = 0 for rho >= 1."""
    if x < 0:
        raise ValidationError(f"wealth must be nonnegative, got {x}")
    if abs(rho - 1.0) < _LOG_RHO_EPS:
        return math.log(x) if x > 0 else -math.inf
    if x == 0 and rho > 1.0:
        return -math.inf
    return (x ** (1.0 - rho) - 1.0) / (1.0 - rho)


def da_utility(x: tuple[float, float], params: DAParams) -> float:
    """w u(max) + (1-w) u(min) for a two-outcome bundle."""
    x_a, x_b = x
    w = params.weight
    hi, lo = (x_a, x_b) if x_a >= x_b else (x_b, x_a)
    return w * crra(hi, params.rho) + (1.0 - w) * crra(lo, params.rho)


def _crra_grid(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Vectorized CRRA with the same branch rules as :func:`crra`."""
    log_branch = np.abs(rho - 1.0) < _LOG_RHO_EPS
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.where(
            log_branch,
            np.log(np.where(x > 0, x, 1.0)),
            (np.power(np.where(x > 0, x, 1.0), 1.0 - rho) - 1.0) / np.where(log_branch, np.nan, 1.0 - rho),
        )
        zero = x <= 0.0
        out = np.where(zero & (rho >= 1.0 - _LOG_RHO_EPS), -np.inf, out)
        out = np.where(zero & (rho < 1.0 - _LOG_RHO_EPS), -1.0 / (1.0 - rho), out)
    return out


def optimal_demand_grid(
    prices: np.ndarray, beta: np.ndarray, rho: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Maximize the kinked objective for every (parameter, budget) pair.

    ``prices`` has shape (N, 2); ``beta`` and ``rho`` shape (G,).  Returns
    demand (G, N, 2), branch codes (G, N) indexing ``_BRANCHES``, utility
    (G, N), and an exact-tie flag (G, N).  Candidates are compared on utility
    with the deterministic tie order kink > larger x_a.
    """
    prices = np.asarray(prices, dtype=float)
    p_a = prices[None, :, 0]
    p_b = prices[None, :, 1]
    beta = np.asarray(beta, dtype=float)[:, None]
    rho = np.asarray(rho, dtype=float)[:, None]
    w = 1.0 / (2.0 + beta)
    odds = w / (1.0 - w)
    inv_rho = 1.0 / rho

    with np.errstate(over="ignore", invalid="ignore"):
        # one-sided interior branches: ratio of the larger to the smaller holding
        k_a = np.power(odds * (p_b / p_a), inv_rho)
        x_b_ia = 1.0 / (p_a * k_a + p_b)
        x_a_ia = k_a * x_b_ia
        k_b = np.power(odds * (p_a / p_b), inv_rho)
        x_a_ib = 1.0 / (p_b * k_b + p_a)
        x_b_ib = k_b * x_a_ib
    x_kink = 1.0 / (p_a + p_b)
    zeros = np.zeros(np.broadcast_shapes(x_kink.shape, rho.shape))
    x_kink_a = np.broadcast_to(x_kink, zeros.shape)

    def utility(xa, xb):
        hi = np.maximum(xa, xb)
        lo = np.minimum(xa, xb)
        return w * _crra_grid(hi, rho) + (1.0 - w) * _crra_grid(lo, rho)

    corner_ok = np.broadcast_to(rho < 1.0, zeros.shape)
    candidates = (
        (x_kink_a, np.broadcast_to(x_kink, zeros.shape), np.ones_like(zeros, dtype=bool)),
        (np.broadcast_to(x_a_ia, zeros.shape), np.broadcast_to(x_b_ia, zeros.shape),
         np.broadcast_to(k_a > 1.0, zeros.shape)),
        (np.broadcast_to(1.0 / p_a, zeros.shape), zeros, corner_ok),
        (np.broadcast_to(x_a_ib, zeros.shape), np.broadcast_to(x_b_ib, zeros.shape),
         np.broadcast_to(k_b > 1.0, zeros.shape)),
        (zeros, np.broadcast_to(1.0 / p_b, zeros.shape), corner_ok),
    )

    best_u = np.full(zeros.shape, -np.inf)
    best_xa = np.zeros(zeros.shape)
    best_xb = np.zeros(zeros.shape)
    best_code = np.zeros(zeros.shape, dtype=np.int8)
    best_is_kink = np.zeros(zeros.shape, dtype=bool)
    tie = np.zeros(zeros.shape, dtype=bool)

    for code, (xa, xb, admissible) in enumerate(candidates):
        u = np.where(admissible, utility(xa, xb), -np.inf)
        is_kink = code == 0
        equal = admissible & (u == best_u) & ((xa != best_xa) | (xb != best_xb))
        tie |= equal
        better = (u > best_u) | (equal & ~best_is_kink & (is_kink | (xa > best_xa)))
        best_xa = np.where(better, xa, best_xa)
        best_xb = np.where(better, xb, best_xb)
        best_code = np.where(better, np.int8(code), best_code)
        best_is_kink = np.where(better, is_kink, best_is_kink)
        best_u = np.where(better, u, best_u)

    demand = np.stack([best_xa, best_xb], axis=-1)
    return demand, best_code, best_u, tie


def optimal_demand(p: PricePair, params: DAParams) -> DemandSolution:
    """Exact demand at one budget; thin wrapper over the vectorized kernel."""
    demand, code, util, tie = optimal_demand_grid(
        np.array([[p.p_a, p.p_b]]), np.array([params.beta]), np.array([params.rho])
    )
    return DemandSolution(
        demand=(float(demand[0, 0, 0]), float(demand[0, 0, 1])),
        branch=_BRANCHES[int(code[0, 0])],
        utility=float(util[0, 0]),
        tie=bool(tie[0, 0]),
    )
