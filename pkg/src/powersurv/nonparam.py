"""Right-censored survival data and the Kaplan-Meier product-limit estimator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy import stats

from .errors import DataError

__all__ = [
    "SurvivalSample",
    "SurvivalData",
    "as_survival_data",
    "KMCurve",
    "km_fit",
    "km_eval",
    "censoring_rate",
]


class SurvivalSample(NamedTuple):
    """One observation: ``time = min(T, C)`` and ``event = T <= C``."""

    time: float
    event: bool


@dataclass(frozen=True)
class SurvivalData:
    """Column view of a right-censored sample."""

    time: np.ndarray
    event: np.ndarray

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).reshape(-1)
        event = np.asarray(self.event).reshape(-1)
        if time.shape != event.shape:
            raise DataError(f"time and event lengths differ ({time.size} vs {event.size})")
        if not np.all(np.isfinite(time)) or np.any(time <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(time) & (time > 0)))[0])
            raise DataError(f"time must be positive and finite, got {time[bad]}", row=bad + 1)
        if event.dtype != bool:
            if not np.all(np.isin(event, (0, 1))):
                raise DataError("event indicators must be 0 or 1")
            event = event.astype(bool)
        time.setflags(write=False)
        event.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)

    def __len__(self):
        return self.time.size

    def __iter__(self):
        for t, e in zip(self.time, self.event):
            yield SurvivalSample(float(t), bool(e))

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def subset(self, mask) -> "SurvivalData":
        return SurvivalData(self.time[mask], self.event[mask])


def as_survival_data(samples) -> SurvivalData:
    """Coerce a ``SurvivalData``, a list of samples or a ``(times, events)`` pair."""
    if isinstance(samples, SurvivalData):
        return samples
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 1:
        return SurvivalData(samples[0], samples[1])
    samples = list(samples)
    if not samples:
        return SurvivalData(np.empty(0), np.empty(0, dtype=bool))
    times, events = zip(*samples)
    return SurvivalData(np.array(times, dtype=float), np.array(events, dtype=bool))


@dataclass(frozen=True)
class KMCurve:
    """Kaplan-Meier step function evaluated at distinct event times.

    ``survival[j]`` is the estimate just after ``times[j]``; ``variance`` is
    Greenwood's estimate.
    """

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    deaths: np.ndarray
    variance: np.ndarray

    def __call__(self, x):
        return km_eval(self, x)

    def left_limit(self, x):
        """``S(x-)``, the value just before ``x``."""
        x_arr = np.asarray(x, dtype=float)
        if self.times.size == 0:
            out = np.ones_like(x_arr)
        else:
            idx = np.searchsorted(self.times, x_arr, side="left") - 1
            out = np.where(idx >= 0, self.survival[np.maximum(idx, 0)], 1.0)
        return float(out) if x_arr.ndim == 0 else out

    def bands(self, level: float = 0.95):
        """Pointwise normal-approximation band, clipped to [0, 1]."""
        z = stats.norm.ppf(0.5 + level / 2.0)
        half = z * np.sqrt(self.variance)
        return np.clip(self.survival - half, 0.0, 1.0), np.clip(self.survival + half, 0.0, 1.0)


def km_fit(samples: Iterable) -> KMCurve:
    """Product-limit estimate. Deaths precede censorings tied at the same time."""
    data = as_survival_data(samples)
    if len(data) == 0:
        raise DataError("cannot fit Kaplan-Meier to an empty sample")
    t = data.time
    event_times = np.unique(t[data.event])
    sorted_t = np.sort(t)
    # everyone with time >= u is at risk at u, including censorings tied at u
    at_risk = sorted_t.size - np.searchsorted(sorted_t, event_times, side="left")
    sorted_ev = np.sort(t[data.event])
    deaths = np.searchsorted(sorted_ev, event_times, side="right") - np.searchsorted(
        sorted_ev, event_times, side="left"
    )
    if data.event.all():
        # without censoring the product telescopes to the empirical fraction
        survival = (at_risk - deaths) / sorted_t.size
    else:
        survival = np.cumprod((at_risk - deaths) / at_risk)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(at_risk > deaths, deaths / (at_risk * (at_risk - deaths)), 0.0)
    variance = survival**2 * np.cumsum(terms)
    return KMCurve(
        times=event_times,
        survival=survival,
        at_risk=at_risk.astype(int),
        deaths=deaths.astype(int),
        variance=variance,
    )


def km_eval(curve: KMCurve, x):
    """Right-continuous evaluation; 1 before the first event, flat after the last."""
    x_arr = np.asarray(x, dtype=float)
    if curve.times.size == 0:
        out = np.ones_like(x_arr)
    else:
        idx = np.searchsorted(curve.times, x_arr, side="right") - 1
        out = np.where(idx >= 0, curve.survival[np.maximum(idx, 0)], 1.0)
    return float(out) if x_arr.ndim == 0 else out


def censoring_rate(samples) -> float:
    """Fraction of censored observations."""
    data = as_survival_data(samples)
    if len(data) == 0:
        raise DataError("censoring rate of an empty sample is undefined")
    return float(1.0 - data.event.mean())
