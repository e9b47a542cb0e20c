"""Two-group comparisons of observed times by an attribute."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats

from .errors import DataError, DegenerateError

__all__ = ["GroupedTimes", "WelchResult", "GroupSummary", "welch_test", "permutation_test", "group_summary"]

CENSORING_CAVEAT = (
    "censored times enter at their observed values; the comparison is not survival-adjusted"
)


@dataclass(frozen=True)
class GroupedTimes:
    label_a: str
    times_a: np.ndarray
    label_b: str
    times_b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times_a", np.asarray(self.times_a, dtype=float).reshape(-1))
        object.__setattr__(self, "times_b", np.asarray(self.times_b, dtype=float).reshape(-1))

    def swapped(self) -> "GroupedTimes":
        return GroupedTimes(self.label_b, self.times_b, self.label_a, self.times_a)


class WelchResult(NamedTuple):
    t: float
    df: float
    p_value: float


class GroupSummary(NamedTuple):
    label: str
    n: int
    mean: float
    median: float
    sd: Optional[float]
    q1: float
    q3: float
    minimum: float
    maximum: float


def welch_test(g: GroupedTimes) -> WelchResult:
    """Welch's unequal-variance t-test, two-sided."""
    a, b = g.times_a, g.times_b
    if a.size < 2 or b.size < 2:
        raise DataError("each group needs at least two observations")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    se2 = va + vb
    if se2 == 0:
        raise DegenerateError("both groups have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    p = 2.0 * stats.t.sf(abs(t), df)
    return WelchResult(float(t), float(df), float(min(1.0, p)))


def permutation_test(g: GroupedTimes, n_resamples: int = 10_000, seed=0) -> float:
    """Two-sided permutation p-value for the difference in means."""
    a, b = g.times_a, g.times_b
    if a.size == 0 or b.size == 0:
        raise DataError("both groups must be nonempty")
    pooled = np.concatenate([a, b])
    observed = abs(a.mean() - b.mean())
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_resamples):
        perm = rng.permutation(pooled)
        if abs(perm[: a.size].mean() - perm[a.size :].mean()) >= observed - 1e-12:
            hits += 1
    return (hits + 1) / (n_resamples + 1)


def _summary(label, x) -> GroupSummary:
    if x.size == 0:
        raise DataError(f"group {label!r} is empty")
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    sd = float(x.std(ddof=1)) if x.size > 1 else None
    return GroupSummary(label, int(x.size), float(x.mean()), float(med), sd, float(q1), float(q3),
                        float(x.min()), float(x.max()))


def group_summary(g: GroupedTimes) -> tuple[GroupSummary, GroupSummary]:
    """Descriptive statistics per group (the data behind a box plot)."""
    return _summary(g.label_a, g.times_a), _summary(g.label_b, g.times_b)
