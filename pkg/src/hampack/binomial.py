"""Exact binomial pmf/cdf, the min-degree quantile, and Chernoff evaluators."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import stats


@dataclass(frozen=True)
class BinomialSpec:
    """Bin(trials, p); degree distributions use trials = n - 1."""

    trials: int
    p: float

    def __post_init__(self):
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")


@dataclass(frozen=True)
class TailBound:
    kind: str  # lower | upper | multiplicative
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("bound must be clamped to [0, 1]")


def binom_pmf_cdf(spec: BinomialSpec, d: int) -> tuple[float, float]:
    """(pmf, cdf) at d, evaluated in log space (no overflow at any scale)."""
    if not 0 <= d <= spec.trials:
        raise ValueError(f"d={d} outside 0..{spec.trials}")
    b = float(stats.binom.pmf(d, spec.trials, spec.p))
    cdf = float(stats.binom.cdf(d, spec.trials, spec.p))
    return b, min(cdf, 1.0)


def pmf_ratio(spec: BinomialSpec, d: int) -> float:
    """Exact b(d)/b(d-1) = ((trials - d + 1)/d) * p/(1-p), for 1 <= d <= trials."""
    if not 1 <= d <= spec.trials:
        raise ValueError(f"d={d} outside 1..{spec.trials}")
    if spec.p == 1.0:
        return math.inf
    return (spec.trials - d + 1) / d * spec.p / (1.0 - spec.p)


def delta_quantile(n: int, p: float) -> int:
    """Smallest d with P(Bin(n-1, p) <= d) >= log(n)/n.

    The typical minimum degree of a binomial random graph sits just
    below this quantile; it is nondecreasing in p for fixed n.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    target = math.log(n) / n
    spec = BinomialSpec(n - 1, p)
    if binom_pmf_cdf(spec, 0)[1] >= target:
        return 0
    # exponential then binary search on the nondecreasing cdf
    lo, hi = 0, 1
    while binom_pmf_cdf(spec, min(hi, n - 1))[1] < target:
        lo = hi
        hi *= 2
        if lo >= n - 1:
            return n - 1
    hi = min(hi, n - 1)
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if binom_pmf_cdf(spec, mid)[1] >= target:
            hi = mid
        else:
            lo = mid
    return hi


def chernoff_bound(spec: BinomialSpec, a: float, kind: str) -> TailBound:
    """Closed-form tail bound for Bin(trials, p); always >= the exact tail.

    lower:          P(X < mu - a)  < exp(-a^2 / (2 mu))
    upper:          P(X > mu + a)  < exp(-a^2 / (2 mu) + a^3 / (2 mu^2))
    multiplicative: P(X > a * mu) <= (e/a)^(a * mu),  a >= 1 plays kappa
    with mu = trials * p.
    """
    mu = spec.trials * spec.p
    if kind in ("lower", "upper"):
        if a < 0:
            raise ValueError("deviation must be >= 0")
        if a == 0 or mu == 0:
            return TailBound(kind, 1.0)
        if kind == "lower":
            value = math.exp(-a * a / (2.0 * mu))
        else:
            value = math.exp(-a * a / (2.0 * mu) + a ** 3 / (2.0 * mu * mu))
    elif kind == "multiplicative":
        if a < 1:
            raise ValueError("multiplicative bound needs kappa >= 1")
        if mu == 0:
            return TailBound(kind, 1.0)
        exponent = a * mu * (1.0 - math.log(a))
        value = 1.0 if exponent >= 0 else math.exp(exponent)
    else:
        raise ValueError(f"unknown tail kind {kind!r}")
    return TailBound(kind, min(value, 1.0))
