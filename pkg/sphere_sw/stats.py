from __future__ import annotations

import numpy as np
from pydantic import BaseModel, model_validator
from scipy.stats import chi2, norm


class Interval(BaseModel):
    lower: float
    upper: float
    level: float

    @model_validator(mode="after")
    def _ordered(self) -> Interval:
        if self.lower > self.upper:
            raise ValueError(f"Interval bounds out of order: {self.lower} > {self.upper}")
        return self

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def overlaps(self, other: Interval) -> bool:
        return self.lower <= other.upper and other.lower <= self.upper


def _check(samples: np.ndarray, level: float) -> np.ndarray:
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 2:
        raise ValueError(f"Confidence intervals need at least 2 samples, got {samples.size}")
    if not 0 < level < 1:
        raise ValueError(f"Confidence level must lie in (0, 1), got {level}")
    return samples


def ci_mean_gaussian(samples: np.ndarray, level: float = 0.95) -> Interval:
    """mean +- z_{(1+level)/2} s / sqrt(n), with s the sample standard deviation."""
    samples = _check(samples, level)
    center = float(samples.mean())
    half = float(norm.ppf(0.5 + level / 2) * samples.std(ddof=1) / np.sqrt(samples.size))
    return Interval(lower=center - half, upper=center + half, level=level)


def ci_variance_chi2(samples: np.ndarray, level: float = 0.95) -> Interval:
    """((n-1) s^2 / chi2_{1-a/2}, (n-1) s^2 / chi2_{a/2}) with a = 1 - level."""
    samples = _check(samples, level)
    dof = samples.size - 1
    scaled = dof * float(samples.var(ddof=1))
    tail = (1.0 - level) / 2
    return Interval(lower=scaled / chi2.ppf(1.0 - tail, dof), upper=scaled / chi2.ppf(tail, dof), level=level)


def bonferroni(level: float, m: int) -> float:
    """Per-test level giving joint coverage ``level`` over m intervals: 1 - (1 - level)/m."""
    if not 0 < level < 1:
        raise ValueError(f"Confidence level must lie in (0, 1), got {level}")
    if m < 1:
        raise ValueError(f"Number of intervals must be >= 1, got {m}")
    return 1.0 - (1.0 - level) / m


class SampleSummary(BaseModel):
    """Replication statistics of an estimator against a reference value.

    ``variance`` is the unbiased sample variance used by the confidence intervals;
    ``spread`` is the mean squared deviation, so ``mse == spread + bias**2``.
    """

    count: int
    mean: float
    variance: float
    spread: float
    bias: float
    mse: float
    mean_ci: Interval
    variance_ci: Interval


def summarize(samples: np.ndarray, reference: float, level: float = 0.95) -> SampleSummary:
    samples = _check(samples, level)
    mean = float(samples.mean())
    return SampleSummary(
        count=samples.size,
        mean=mean,
        variance=float(samples.var(ddof=1)),
        spread=float(samples.var()),
        bias=mean - reference,
        mse=float(np.mean((samples - reference) ** 2)),
        mean_ci=ci_mean_gaussian(samples, level),
        variance_ci=ci_variance_chi2(samples, level),
    )


def loglog_slope(n: np.ndarray, errors: np.ndarray) -> float:
    """Least-squares slope of log(errors) against log(n)."""
    slope, _ = np.polyfit(np.log(np.asarray(n, dtype=float)), np.log(np.asarray(errors, dtype=float)), 1)
    return float(slope)
