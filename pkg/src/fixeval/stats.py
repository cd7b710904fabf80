"""Statistical kernel: pass@k, summaries, Pearson, Wilcoxon signed-rank, OLS.

Everything here is pure stdlib and deterministic. The two significance tests
carry their own p-value machinery (Student-t tail via the regularized
incomplete beta function, exact Wilcoxon via a subset-sum distribution over
ranks) so the runtime has no heavyweight numeric dependencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Sequence


@dataclass(frozen=True)
class SummaryStats:
    """Minimum, maximum, mean, and sample standard deviation (n-1 divisor)."""

    min: float
    max: float
    mean: float
    std: float


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_two_sided: float
    n_pairs: int


@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    p_two_sided: float
    method: str  # "exact" or "normal_approx"
    n_effective: int


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float


# Exact Wilcoxon enumeration is O(n * max_sum); 2^25 sign vectors would be the
# equivalent brute-force cost, which bounds the plain-enumeration mental model.
EXACT_WILCOXON_MAX_N = 25


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator ``1 - C(n-c, k) / C(n, k)``.

    ``n`` is the number of samples drawn for one task, ``c`` how many of them
    passed, and ``k`` the budget being scored. Computed with the numerically
    stable running product rather than factorials.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= c <= n:
        raise ValueError(f"c must satisfy 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")
    if n - c < k:
        return 1.0
    prod = 1.0
    for i in range(n - c + 1, n + 1):
        prod *= 1.0 - k / i
    return 1.0 - prod


def aggregate_pass_at_k(per_task: Sequence[tuple[int, int]], k: int) -> float:
    """Mean of per-task pass@k over ``(n, c)`` pairs."""
    if not per_task:
        raise ValueError("per_task must be non-empty")
    return math.fsum(pass_at_k(n, c, k) for n, c in per_task) / len(per_task)


def summarize(values: Sequence[float]) -> SummaryStats:
    if not values:
        raise ValueError("values must be non-empty")
    mean = math.fsum(values) / len(values)
    if len(values) >= 2:
        var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
        std = math.sqrt(var)
    else:
        std = 0.0
    return SummaryStats(min=min(values), max=max(values), mean=mean, std=std)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
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
            break
    return h


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), accurate to ~1e-12."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the symmetry transform to keep the continued fraction convergent.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _student_t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided tail probability of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return _betainc_reg(df / 2.0, 0.5, x)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    """Product-moment correlation with a two-sided t-test p-value."""
    if len(xs) != len(ys):
        raise ValueError("xs and ys must have equal length")
    n = len(xs)
    if n < 3:
        raise ValueError("pearson requires at least 3 pairs")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("pearson is undefined for zero-variance input")
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = _student_t_sf_two_sided(t, n - 2)
    return CorrelationResult(r=r, p_two_sided=p, n_pairs=n)


def _signed_ranks(diffs: Sequence[float]) -> tuple[list[float], list[int]]:
    """Average ranks of |diffs| plus the tie-group sizes."""
    order = sorted(range(len(diffs)), key=lambda i: abs(diffs[i]))
    ranks = [0.0] * len(diffs)
    tie_sizes: list[int] = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(diffs[order[j + 1]]) == abs(diffs[order[i]]):
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for idx in order[i : j + 1]:
            ranks[idx] = avg
        tie_sizes.append(j - i + 1)
        i = j + 1
    return ranks, tie_sizes


def _exact_wilcoxon_p(doubled_ranks: Sequence[int], w_plus_doubled: int) -> float:
    """Two-sided exact p from the distribution of the positive-rank sum.

    Counts sign assignments by dynamic programming over the doubled ranks
    (doubling makes tied average ranks integral), which is arithmetically
    identical to enumerating all 2^n sign vectors.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    denom = float(2 ** len(doubled_ranks))
    p_le = sum(counts[: w_plus_doubled + 1]) / denom
    p_ge = sum(counts[w_plus_doubled:]) / denom
    return min(1.0, 2.0 * min(p_le, p_ge))


def wilcoxon_signed_rank(
    before: Sequence[float], after: Sequence[float]
) -> WilcoxonResult:
    """Paired signed-rank test on ``after - before``.

    Zero differences are dropped; ties receive average ranks. The statistic is
    ``W = min(W+, W-)``. The p-value is exact (sign enumeration) up to
    ``n_effective <= 25`` and a tie-corrected normal approximation beyond.
    """
    if len(before) != len(after):
        raise ValueError("before and after must have equal length")
    diffs = [a - b for b, a in zip(before, after) if a - b != 0.0]
    n = len(diffs)
    if n < 5:
        raise ValueError(
            f"wilcoxon_signed_rank needs >= 5 nonzero differences, got {n}"
        )
    ranks, tie_sizes = _signed_ranks(diffs)
    w_plus = math.fsum(r for r, d in zip(ranks, diffs) if d > 0)
    w_minus = math.fsum(r for r, d in zip(ranks, diffs) if d < 0)
    w = min(w_plus, w_minus)
    if n <= EXACT_WILCOXON_MAX_N:
        doubled = [round(2 * r) for r in ranks]
        p = _exact_wilcoxon_p(doubled, round(2 * w_plus))
        return WilcoxonResult(
            w_statistic=w, p_two_sided=p, method="exact", n_effective=n
        )
    mean = n * (n + 1) / 4.0
    tie_term = math.fsum(t**3 - t for t in tie_sizes) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    z = (w_plus - mean) / math.sqrt(var)
    p = 2.0 * (1.0 - NormalDist().cdf(abs(z)))
    return WilcoxonResult(
        w_statistic=w, p_two_sided=min(1.0, p), method="normal_approx", n_effective=n
    )


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> RegressionFit:
    """Ordinary least squares line with the coefficient of determination."""
    if len(xs) != len(ys):
        raise ValueError("xs and ys must have equal length")
    if len(xs) < 2:
        raise ValueError("linear_fit requires at least 2 points")
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    if sxx == 0.0:
        raise ValueError("linear_fit is undefined when all xs are equal")
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    ss_res = math.fsum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = math.fsum((y - my) ** 2 for y in ys)
    r_squared = 0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionFit(slope=slope, intercept=intercept, r_squared=r_squared)


def mean(values: Iterable[float]) -> float:
    vals = list(values)
    if not vals:
        raise ValueError("mean of empty sequence")
    return math.fsum(vals) / len(vals)
