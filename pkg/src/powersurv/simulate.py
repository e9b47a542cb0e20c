"""Sampling, censoring injection and Monte Carlo estimator studies."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .cure import LongTermModel
from .distribution import PiecewisePowerLaw
from .errors import CalibrationError, ConvergenceError, DegenerateError, ParameterError, PowerSurvError
from .estimation import closed_form_alphas, default_workers, fisher_ci, mle_cure
from .nonparam import SurvivalData

__all__ = [
    "sample",
    "sample_cure",
    "apply_censoring",
    "expected_min",
    "censoring_probability",
    "calibrate_ymax",
    "MCConfig",
    "MCCell",
    "MCReport",
    "mc_study",
    "replication_seed",
]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample(model: PiecewisePowerLaw, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` lifetimes by inverting the survival function."""
    rng = _rng(seed)
    return np.asarray(model.quantile(rng.random(int(n))))


def sample_cure(
    model: LongTermModel,
    n: int,
    horizon: float,
    seed=None,
    censor_ymax: Optional[float] = None,
) -> SurvivalData:
    """Draw from a long-term model observed up to ``horizon``.

    Cured units never fail and are censored at the horizon (or at their
    uniform censoring time when ``censor_ymax`` is given). Lifetimes are
    drawn before cure indicators, so ``pi = 0`` reproduces :func:`sample`.
    """
    if not horizon > model.x_min:
        raise ParameterError("horizon", f"must exceed x_min={model.x_min}")
    rng = _rng(seed)
    t = sample(model.base, n, rng)
    cured = rng.random(int(n)) < model.pi
    t[cured] = np.inf
    c = np.full(t.shape, float(horizon))
    if censor_ymax is not None:
        c = np.minimum(c, censor_ymax * (1.0 - rng.random(int(n))))
    event = t <= c
    return SurvivalData(np.where(event, t, c), event)


def apply_censoring(times, y_max: float, seed=None) -> SurvivalData:
    """Independent uniform censoring on ``(0, y_max]``."""
    if not y_max > 0:
        raise ParameterError("y_max", f"must be positive, got {y_max}")
    x = np.asarray(times, dtype=float)
    rng = _rng(seed)
    if math.isinf(y_max):
        return SurvivalData(x.copy(), np.ones(x.shape, dtype=bool))
    y = y_max * (1.0 - rng.random(x.shape))
    event = x <= y
    return SurvivalData(np.where(event, x, y), event)


def expected_min(model, c: float) -> float:
    """``E[min(X, c)] = integral_0^c S(x) dx`` in closed form.

    Cured units of a :class:`LongTermModel` contribute ``c`` each.
    """
    if isinstance(model, LongTermModel):
        return model.pi * c + (1.0 - model.pi) * expected_min(model.base, c)
    total = min(c, model.x_min)
    uppers = model.breaks + (math.inf,)
    for lo, hi, a, logc in zip(model.edges, uppers, model.alphas, model.log_constants):
        if c <= lo:
            break
        top = min(hi, c)
        # integral of exp(logc) (x/lo)^(1-a) over [lo, top]
        e = 2.0 - a
        ratio = math.log(top / lo)
        if abs(e) < 1e-12:
            part = lo * ratio
        else:
            part = lo * math.expm1(e * ratio) / e
        total += math.exp(logc) * part
    return total


def censoring_probability(model, y_max: float) -> float:
    """``P(Y < X)`` for ``Y ~ Uniform(0, y_max)`` independent of ``X``."""
    return expected_min(model, y_max) / y_max


def calibrate_ymax(model, target: float, tol: float = 1e-4, max_iter: int = 200) -> float:
    """Bisection (in log scale) for the ``y_max`` giving censoring rate ``target``."""
    if not (0.0 < target < 1.0):
        raise CalibrationError(f"target censoring rate must lie in (0, 1), got {target}")
    x_min = model.x_min
    lo, hi = math.log(x_min), math.log(x_min) + 200.0
    p_lo, p_hi = censoring_probability(model, math.exp(lo)), censoring_probability(model, math.exp(hi))
    if not (p_hi < target < p_lo or math.isclose(target, p_hi, abs_tol=tol)):
        raise CalibrationError(
            f"target {target} outside reachable range ({p_hi:.3g}, {p_lo:.3g}) on the bracket"
        )
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        p = censoring_probability(model, math.exp(mid))
        if abs(p - target) < tol * 1e-3 or hi - lo < 1e-14:
            break
        if p > target:
            lo = mid
        else:
            hi = mid
    y_max = math.exp(mid)
    if abs(censoring_probability(model, y_max) - target) >= tol:
        raise CalibrationError(f"bisection stalled short of target {target}")
    return y_max


# -- Monte Carlo study ---------------------------------------------------------


@dataclass(frozen=True)
class MCConfig:
    """Settings of a Monte Carlo bias/RMSE/coverage study."""

    x_min: float
    breaks: tuple[float, ...]
    alphas: tuple[float, ...]
    pi: float = 0.0
    sample_sizes: tuple[int, ...] = (20, 60, 100, 140, 180, 220, 260, 300)
    replications: int = 2000
    censoring: float = 0.37
    seed: int = 0
    level: float = 0.95
    horizon: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if self.replications < 1:
            raise ParameterError("replications", "must be >= 1")
        if any(n < 2 for n in self.sample_sizes):
            raise ParameterError("sample_sizes", "every sample size must be >= 2")
        if not (0.0 <= self.censoring < 1.0):
            raise ParameterError("censoring", "must lie in [0, 1)")
        self.model  # validates the distribution parameters

    @property
    def model(self) -> LongTermModel:
        return LongTermModel(self.pi, PiecewisePowerLaw(self.x_min, self.breaks, self.alphas))

    @property
    def parameter_names(self) -> list[str]:
        names = [f"alpha_{i + 1}" for i in range(len(self.alphas))]
        return names + (["pi"] if self.pi > 0 else [])

    @property
    def truth(self) -> np.ndarray:
        return np.array(self.alphas + ((self.pi,) if self.pi > 0 else ()))

    @classmethod
    def from_dict(cls, d: dict) -> "MCConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError("config", f"unknown keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "MCConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["breaks"], d["alphas"], d["sample_sizes"] = list(self.breaks), list(self.alphas), list(self.sample_sizes)
        return d


@dataclass(frozen=True)
class MCCell:
    parameter: str
    n: int
    bias: float
    rmse: float
    coverage: float
    dropped: int
    replications_used: int
    bias_se: float
    rmse_se: float


@dataclass(frozen=True)
class MCReport:
    config: MCConfig
    y_max: float
    cells: tuple[MCCell, ...] = field(default_factory=tuple)

    def cell(self, parameter: str, n: int) -> MCCell:
        for c in self.cells:
            if c.parameter == parameter and c.n == n:
                return c
        raise KeyError((parameter, n))

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "y_max": self.y_max if math.isfinite(self.y_max) else None,
            "cells": [asdict(c) for c in self.cells],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "n", "bias", "rmse", "coverage", "dropped"])
        for c in self.cells:
            w.writerow([c.parameter, c.n, repr(c.bias), repr(c.rmse), repr(c.coverage), c.dropped])
        return buf.getvalue()


def replication_seed(master: int, size_index: int, replication: int) -> np.random.SeedSequence:
    """Seed of one replication, reproducible without running the others."""
    return np.random.SeedSequence(entropy=master, spawn_key=(size_index, replication))


def _closed_form_estimator(data: SurvivalData, config: MCConfig):
    alphas, _, d = closed_form_alphas(data, config.x_min, config.breaks, drop_censored_below=True)
    cis = [fisher_ci(a, int(dj), config.level) for a, dj in zip(alphas, d)]
    return alphas, np.array(cis)


def _cure_estimator(data: SurvivalData, config: MCConfig):
    fit = mle_cure(data, config.x_min, config.breaks, cure=True, drop_censored_below=True)
    est = np.array(fit.alphas + (fit.pi,))
    se = np.array(fit.std_errors + (fit.pi_se,))
    z = stats.norm.ppf(0.5 + config.level / 2.0)
    return est, np.column_stack([est - z * se, est + z * se])


def _simulate(config: MCConfig, y_max: float, n: int, rng) -> SurvivalData:
    model = config.model
    if config.pi > 0:
        horizon = config.horizon if config.horizon is not None else y_max
        if not math.isfinite(horizon):
            raise ParameterError("horizon", "a finite horizon is required without censoring")
        return sample_cure(model, n, horizon, rng, censor_ymax=y_max if math.isfinite(y_max) else None)
    return apply_censoring(sample(model.base, n, rng), y_max, rng)


def _run_size(config: MCConfig, y_max: float, size_index: int, estimator):
    n = config.sample_sizes[size_index]
    p = len(config.truth)
    est = np.full((config.replications, p), np.nan)
    ci = np.full((config.replications, p, 2), np.nan)
    for r in range(config.replications):
        rng = np.random.default_rng(replication_seed(config.seed, size_index, r))
        data = _simulate(config, y_max, n, rng)
        try:
            e, c = estimator(data, config)
        except (DegenerateError, ConvergenceError):
            continue
        est[r], ci[r] = e, c
    return est, ci


def mc_study(
    config: MCConfig,
    estimator: Optional[Callable] = None,
    workers: Optional[int] = None,
) -> MCReport:
    """Bias, RMSE and interval coverage of the estimators across sample sizes.

    Replications whose segments receive no events are dropped and counted.
    ``estimator(data, config) -> (estimates, intervals)`` may replace the
    default closed-form (or, with a cure fraction, numerical) estimator.
    """
    if estimator is None:
        estimator = _cure_estimator if config.pi > 0 else _closed_form_estimator
    y_max = calibrate_ymax(config.model, config.censoring) if config.censoring > 0 else math.inf
    workers = default_workers() if workers is None else max(1, int(workers))

    idx = range(len(config.sample_sizes))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_size, [config] * len(idx), [y_max] * len(idx), idx, [estimator] * len(idx)))
    else:
        results = [_run_size(config, y_max, i, estimator) for i in idx]

    truth = config.truth
    cells = []
    for name_i, name in enumerate(config.parameter_names):
        for n, (est, ci) in zip(config.sample_sizes, results):
            ok = ~np.isnan(est[:, name_i])
            used = int(ok.sum())
            if used == 0:
                raise PowerSurvError(f"every replication at n={n} was degenerate")
            err = est[ok, name_i] - truth[name_i]
            sq = err**2
            bias = float(np.mean(err))
            rmse = float(math.sqrt(np.mean(sq)))
            lo, hi = ci[ok, name_i, 0], ci[ok, name_i, 1]
            coverage = float(np.mean((lo <= truth[name_i]) & (truth[name_i] <= hi)))
            bias_se = float(np.std(err, ddof=1) / math.sqrt(used)) if used > 1 else math.nan
            rmse_se = (
                float(np.std(sq, ddof=1) / (2.0 * rmse * math.sqrt(used))) if used > 1 and rmse > 0 else 0.0
            )
            cells.append(
                MCCell(name, n, bias, rmse, coverage, config.replications - used, used, bias_se, rmse_se)
            )
    return MCReport(config, y_max, tuple(cells))
