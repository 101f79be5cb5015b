"""Two-sample tests used by the stage-two battery, and Kendall's tau-b."""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class StatResult:
    """A statistic, its p-value, and whether a degenerate input forced the values."""
    statistic: float
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class ThreeSigmaResult:
    passed: bool
    fraction: float
    lower: float
    upper: float


def _sample(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("sample must be nonempty")
    return x


def ks2_test(sample_a, sample_b) -> StatResult:
    """Two-sample KS; p from the asymptotic Kolmogorov law with n = na*nb/(na+nb)."""
    a, b = _sample(sample_a), _sample(sample_b)
    statistic = float(stats.ks_2samp(a, b).statistic)
    en = a.size * b.size / (a.size + b.size)
    p_value = float(stats.kstwobign.sf(math.sqrt(en) * statistic))
    return StatResult(statistic, min(1.0, p_value))


def t_test(sample_a, sample_b) -> StatResult:
    """t = (mean_a - mean_b) / S * sqrt(na*nb/(na+nb)) with S = sqrt((s2_a + s2_b)/2)."""
    a, b = _sample(sample_a), _sample(sample_b)
    if a.size < 2 or b.size < 2:
        raise ValueError("t-test needs at least two values per sample")
    diff = a.mean() - b.mean()
    pooled = math.sqrt((a.var(ddof=1) + b.var(ddof=1)) / 2.0)
    if pooled == 0.0:
        if diff == 0.0:
            return StatResult(0.0, 1.0, degenerate=True)
        return StatResult(math.copysign(math.inf, diff), 0.0, degenerate=True)

    t = diff / pooled * math.sqrt(a.size * b.size / (a.size + b.size))
    p_value = 2.0 * stats.t.sf(abs(t), df=a.size + b.size - 2)
    return StatResult(float(t), float(min(1.0, p_value)))


def f_test(sample_a, sample_b) -> StatResult:
    """Variance ratio s2_a / s2_b with a two-sided p-value."""
    a, b = _sample(sample_a), _sample(sample_b)
    if a.size < 2 or b.size < 2:
        raise ValueError("F-test needs at least two values per sample")
    var_a, var_b = a.var(ddof=1), b.var(ddof=1)
    if var_b == 0.0:
        return StatResult(math.inf, 0.0, degenerate=True)

    ratio = var_a / var_b
    dfn, dfd = a.size - 1, b.size - 1
    p_value = 2.0 * min(stats.f.cdf(ratio, dfn, dfd), stats.f.sf(ratio, dfn, dfd))
    return StatResult(float(ratio), float(min(1.0, p_value)))


def anova_f_test(syn_classes, real_classes, class_count: int) -> StatResult:
    """One-way ANOVA over classes of the paired membership differences.

    Group k holds 1[syn_i = k] - 1[real_i = k] for each draw i; only classes
    seen in either batch form a group.
    """
    syn = np.asarray(syn_classes, dtype=np.int64).ravel()
    real = np.asarray(real_classes, dtype=np.int64).ravel()
    if syn.size != real.size or syn.size == 0:
        raise ValueError("ANOVA needs two nonempty batches of equal size")

    present = [k for k in range(class_count) if np.any(syn == k) or np.any(real == k)]
    groups = [(syn == k).astype(np.float64) - (real == k).astype(np.float64) for k in present]
    if len(groups) < 2 or all(not g.any() for g in groups):
        return StatResult(0.0, 1.0, degenerate=len(groups) < 2)

    within = sum(((g - g.mean()) ** 2).sum() for g in groups)
    if within == 0.0:
        return StatResult(math.inf, 0.0, degenerate=True)
    result = stats.f_oneway(*groups)
    return StatResult(float(result.statistic), float(result.pvalue))


def three_sigma_test(real_batch, syn_batch, sigma_multiplier: float, coverage: float) -> ThreeSigmaResult:
    """Pass iff the share of synthetic values inside mean(real) +- k*sd(real) is above `coverage`."""
    real, syn = _sample(real_batch), _sample(syn_batch)
    centre = real.mean()
    spread = sigma_multiplier * (real.std(ddof=1) if real.size > 1 else 0.0)
    lower, upper = centre - spread, centre + spread
    fraction = float(np.mean((syn >= lower) & (syn <= upper)))
    return ThreeSigmaResult(fraction > coverage, fraction, float(lower), float(upper))


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """Kendall tau-b; a constant column yields 0 flagged as degenerate."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"columns differ in length: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("Kendall tau needs at least two pairs")
    result = stats.kendalltau(x, y, variant='b')
    if np.isnan(result.statistic):
        return StatResult(0.0, 1.0, degenerate=True)
    return StatResult(float(result.statistic), float(result.pvalue))
