"""Summary statistics, representative-sample filtering, OLS alignment, Welch tests.

Percentiles use inclusive linear interpolation between order statistics (the
value at probe point k/(n-1) is the k-th order statistic).  The alignment
regression is univariate OLS with heteroskedasticity-consistent standard
errors (HC1 by default, HC0 on request) and two-sided normal-approximation
p-values.  The Welch test computes its two-sided p-value from a Student-t
CDF implemented via the regularized incomplete beta continued fraction
(Lentz recurrence), accurate to well below 1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class SummaryRow:
    p5: float
    p25: float
    p50: float
    p75: float
    p95: float
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class RegressionResult:
    gamma: float
    alpha: float
    se_gamma: float
    se_alpha: float
    n: int
    p_gamma: float
    p_alpha: float


def summarize(values: Sequence[float]) -> SummaryRow:
    """Percentiles, mean, and sample standard deviation of one variable."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValidationError("cannot summarize an empty sample")
    q = np.quantile(arr, [0.05, 0.25, 0.50, 0.75, 0.95], method="linear")
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return SummaryRow(*(float(v) for v in q), float(np.mean(arr)), std, int(arr.size))


def representative_filter(betas: Sequence[float], rhos: Sequence[float]) -> np.ndarray:
    """Mask of subjects whose parameters both lie in the closed IQR box."""
    b = np.asarray(betas, dtype=float)
    r = np.asarray(rhos, dtype=float)
    if b.shape != r.shape:
        raise ValidationError("beta and rho samples must have equal length")
    if b.size < 4:
        raise ValidationError(f"need at least 4 subjects, got {b.size}")
    b_lo, b_hi = np.quantile(b, [0.25, 0.75], method="linear")
    r_lo, r_hi = np.quantile(r, [0.25, 0.75], method="linear")
    return (b >= b_lo) & (b <= b_hi) & (r >= r_lo) & (r <= r_hi)


def _normal_two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def regress_alignment(
    truth: Sequence[float], estimates: Sequence[float], variance: str = "HC1"
) -> RegressionResult:
    """OLS of estimates on truth: estimate = alpha + gamma * truth + error.

    The robust covariance is (X'X)^-1 X' diag(e^2) X (X'X)^-1, scaled by
    n/(n-2) for HC1 and unscaled for HC0.
    """
    x = np.asarray(truth, dtype=float)
    y = np.asarray(estimates, dtype=float)
    if x.shape != y.shape:
        raise ValidationError("truth and estimate vectors must have equal length")
    n = x.size
    if n < 3:
        raise ValidationError(f"need at least 3 observations, got {n}")
    if variance not in ("HC1", "HC0"):
        raise ValidationError(f"unknown variance estimator {variance!r}")
    if np.ptp(x) == 0.0:
        raise ValidationError("singular design: truth parameter has zero variance")

    design = np.column_stack([np.ones(n), x])
    xtx = design.T @ design
    bread = np.linalg.inv(xtx)
    coef = bread @ (design.T @ y)
    alpha, gamma = float(coef[0]), float(coef[1])
    resid = y - design @ coef
    meat = design.T @ (design * (resid * resid)[:, None])
    cov = bread @ meat @ bread
    if variance == "HC1":
        cov = cov * (n / (n - 2))
    se_alpha = math.sqrt(max(cov[0, 0], 0.0))
    se_gamma = math.sqrt(max(cov[1, 1], 0.0))
    p_alpha = _normal_two_sided_p(alpha / se_alpha) if se_alpha > 0 else (1.0 if alpha == 0 else 0.0)
    p_gamma = _normal_two_sided_p(gamma / se_gamma) if se_gamma > 0 else (1.0 if gamma == 0 else 0.0)
    return RegressionResult(gamma, alpha, se_gamma, se_alpha, n, p_gamma, p_alpha)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Lentz evaluation of the incomplete-beta continued fraction."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-14:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, dof: float) -> float:
    """P(|T| >= |t|) for Student-t with (possibly fractional) dof."""
    if dof <= 0:
        raise ValidationError(f"degrees of freedom must be positive, got {dof}")
    if t == 0.0:
        return 1.0
    if math.isinf(t):
        return 0.0
    return _regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> tuple[float, float, float]:
    """Welch statistic, Satterthwaite degrees of freedom, two-sided p-value."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValidationError("both samples need at least 2 observations")
    va = float(np.var(a, ddof=1)) / a.size
    vb = float(np.var(b, ddof=1)) / b.size
    diff = float(np.mean(a) - np.mean(b))
    if va + vb == 0.0:
        # no variance anywhere: identical-mean samples are a non-result
        return (0.0, float(a.size + b.size - 2), 1.0) if diff == 0.0 else (math.inf, 1.0, 0.0)
    t = diff / math.sqrt(va + vb)
    dof = (va + vb) ** 2 / (va * va / (a.size - 1) + vb * vb / (b.size - 1))
    return t, dof, student_t_two_sided_p(t, dof)
