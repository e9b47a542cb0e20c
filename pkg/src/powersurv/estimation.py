"""Maximum-likelihood fitting, change-point search and model diagnostics.

Every observation contributes through its log-exposure in each segment,
``L_m(x) = log(min(x, b_m) / b_{m-1})`` clipped at zero, so that
``log S_0(x) = -sum_m (alpha_m - 1) L_m(x)``. The log-likelihood of the
long-term model is

    sum_events   log(1 - pi) + log(alpha_j - 1) - log x + log S_0(x)
  + sum_censored log(pi + (1 - pi) S_0(x))

which is concave in the exponents when ``pi = 0`` and admits the closed-form
estimator ``alpha_m = 1 + d_m / sum_i L_m(x_i)``.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar

from .cure import LongTermModel
from .distribution import PiecewisePowerLaw
from .errors import ConvergenceError, DegenerateError, DomainError, SearchError
from .nonparam import KMCurve, SurvivalData, as_survival_data, km_fit

__all__ = [
    "FitResult",
    "closed_form_alphas",
    "mle_closed_form",
    "fisher_ci",
    "loglik",
    "mle_cure",
    "ks_distance",
    "estimate_changepoints",
    "aic",
    "cox_snell",
    "ALPHA_MAX",
    "PI_MAX",
]

ALPHA_MAX = 50.0
PI_MAX = 1.0 - 1e-9
_ALPHA_FLOOR = 1.0 + 1e-8


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("POWERSURV_WORKERS", "1")))
    except ValueError:
        return 1


def _as_breaks(breaks) -> tuple[float, ...]:
    if breaks is None:
        return ()
    if np.ndim(breaks) == 0:
        return (float(breaks),)
    return tuple(float(b) for b in breaks)


@dataclass(frozen=True)
class _Design:
    """Per-observation quantities that do not depend on the parameters."""

    time: np.ndarray
    event: np.ndarray
    exposure: np.ndarray  # (n, k) log-exposures L_m(x_i)
    segment: np.ndarray
    n_dropped: int

    @property
    def k(self):
        return self.exposure.shape[1]


def _design(data: SurvivalData, x_min: float, breaks, drop_censored_below: bool) -> _Design:
    edges = np.array((float(x_min),) + tuple(breaks))
    below = data.time < x_min
    if np.any(below & data.event):
        raise DomainError(f"event time below x_min={x_min}")
    if np.any(below) and not drop_censored_below:
        raise DomainError(f"observation below x_min={x_min}")
    keep = ~below
    t = data.time[keep]
    uppers = np.append(edges[1:], np.inf)
    clipped = np.minimum(t[:, None], uppers[None, :])
    exposure = np.log(np.maximum(clipped, edges[None, :]) / edges[None, :])
    segment = np.searchsorted(edges, t, side="right") - 1
    return _Design(t, data.event[keep], exposure, segment, int(below.sum()))


def _segment_counts(des: _Design):
    n = np.bincount(des.segment, minlength=des.k)
    d = np.bincount(des.segment[des.event], minlength=des.k)
    return n, d


# -- closed form ---------------------------------------------------------------


def closed_form_alphas(samples, x_min: float, breaks=(), drop_censored_below: bool = False):
    """Closed-form censored MLEs without a cure fraction.

    Returns ``(alphas, segment_n, segment_d)`` as arrays.
    """
    data = as_survival_data(samples)
    breaks = _as_breaks(breaks)
    des = _design(data, x_min, breaks, drop_censored_below)
    n, d = _segment_counts(des)
    if np.any(d == 0):
        seg = int(np.flatnonzero(d == 0)[0]) + 1
        raise DegenerateError(f"segment {seg} has no events")
    total_exposure = des.exposure.sum(axis=0)
    if np.any(total_exposure <= 0):
        seg = int(np.flatnonzero(total_exposure <= 0)[0]) + 1
        raise DegenerateError(f"segment {seg} has zero total log-exposure")
    return 1.0 + d / total_exposure, n, d


def fisher_ci(alpha_hat: float, d: int, level: float = 0.95) -> tuple[float, float]:
    """Wald interval ``alpha_hat -/+ z * (alpha_hat - 1) / sqrt(d)``."""
    if d < 1:
        raise DegenerateError("Fisher interval needs at least one event")
    if not (0.0 <= level < 1.0):
        raise DomainError(f"level must lie in [0, 1), got {level}")
    half = stats.norm.ppf(0.5 + level / 2.0) * (alpha_hat - 1.0) / math.sqrt(d)
    return alpha_hat - half, alpha_hat + half


# -- fit result ----------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """Estimated long-term power-law model and its diagnostics.

    ``pi_free`` records whether the cure fraction was estimated; when it was
    not, ``model.pi`` is 0 and ``pi_se`` is ``None``.
    """

    model: LongTermModel
    segment_n: tuple[int, ...]
    segment_d: tuple[int, ...]
    std_errors: tuple[float, ...]
    loglik: float
    n_params: int
    pi_free: bool = False
    pi_se: Optional[float] = None
    breaks_searched: bool = False
    converged: bool = True
    iterations: int = 0
    n_dropped: int = 0
    ks: Optional[float] = None
    refined: bool = False
    aic: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "aic", 2.0 * self.n_params - 2.0 * self.loglik)

    @property
    def alphas(self) -> tuple[float, ...]:
        return self.model.base.alphas

    @property
    def breaks(self) -> tuple[float, ...]:
        return self.model.base.breaks

    @property
    def pi(self) -> float:
        return self.model.pi

    @property
    def k(self) -> int:
        return self.model.base.k

    @property
    def param_count_convention(self) -> str:
        parts = ["exponents"]
        if self.pi_free:
            parts.append("cure fraction")
        if self.n_params > self.k + int(self.pi_free):
            parts.append("searched breaks")
        return " + ".join(parts)

    def confidence_intervals(self, level: float = 0.95) -> dict:
        z = stats.norm.ppf(0.5 + level / 2.0)
        out = {
            f"alpha_{i + 1}": (a - z * se, a + z * se)
            for i, (a, se) in enumerate(zip(self.alphas, self.std_errors))
        }
        if self.pi_se is not None:
            out["pi"] = (self.pi - z * self.pi_se, self.pi + z * self.pi_se)
        return out

    def to_dict(self, level: float = 0.95) -> dict:
        cis = self.confidence_intervals(level)
        return {
            "model": self.model.to_dict(),
            "alphas": list(self.alphas),
            "breaks": list(self.breaks),
            "pi": self.pi,
            "std_errors": {
                **{f"alpha_{i + 1}": se for i, se in enumerate(self.std_errors)},
                **({"pi": self.pi_se} if self.pi_se is not None else {}),
            },
            "confidence_level": level,
            "confidence_intervals": {name: list(ci) for name, ci in cis.items()},
            "loglik": self.loglik,
            "aic": self.aic,
            "n_params": self.n_params,
            "param_count_convention": self.param_count_convention,
            "segment_n": list(self.segment_n),
            "segment_d": list(self.segment_d),
            "n_dropped_below_xmin": self.n_dropped,
            "pi_free": self.pi_free,
            "breaks_searched": self.breaks_searched,
            "ks_distance": self.ks,
            "refined": self.refined,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _count_params(k: int, pi_free: bool, breaks_searched: bool) -> int:
    return k + int(pi_free) + (k - 1 if breaks_searched else 0)


def mle_closed_form(
    samples, x_min: float, breaks=(), drop_censored_below: bool = False
) -> FitResult:
    """Closed-form censored MLE of the exponents for fixed ``x_min`` and breaks.

    With all observations uncensored this reduces to the complete-data
    estimator. Standard errors are ``(alpha - 1) / sqrt(d)``.
    """
    data = as_survival_data(samples)
    breaks = _as_breaks(breaks)
    alphas, n, d = closed_form_alphas(data, x_min, breaks, drop_censored_below)
    model = LongTermModel(0.0, PiecewisePowerLaw(x_min, breaks, tuple(alphas)))
    des = _design(data, x_min, breaks, drop_censored_below)
    ll = _loglik_design(des, alphas, 0.0)
    return FitResult(
        model=model,
        segment_n=tuple(int(v) for v in n),
        segment_d=tuple(int(v) for v in d),
        std_errors=tuple(float(v) for v in (alphas - 1.0) / np.sqrt(d)),
        loglik=float(ll),
        n_params=_count_params(len(alphas), False, False),
        n_dropped=des.n_dropped,
    )


# -- log-likelihood ------------------------------------------------------------


def loglik(model, samples, drop_censored_below: bool = False) -> float:
    """Censored log-likelihood of a :class:`LongTermModel` (or plain power law).

    Computed from the model's own density and survival functions; censored
    observations below ``x_min`` are rejected unless ``drop_censored_below``.
    """
    if isinstance(model, PiecewisePowerLaw):
        model = LongTermModel(0.0, model)
    data = as_survival_data(samples)
    below = data.time < model.x_min
    if np.any(below & data.event) or (np.any(below) and not drop_censored_below):
        raise DomainError(f"observation below x_min={model.x_min}")
    t, e = data.time[~below], data.event[~below]
    ll = np.sum(model.log_pdf_pop(t[e])) + np.sum(model.log_survival_pop(t[~e]))
    return float(ll)


def _loglik_design(des: _Design, alphas, pi: float) -> float:
    alphas = np.asarray(alphas, dtype=float)
    eta = -des.exposure @ (alphas - 1.0)
    ev = des.event
    ll_ev = np.sum(np.log(alphas[des.segment[ev]] - 1.0) - np.log(des.time[ev]) + eta[ev])
    if pi > 0.0:
        ll_ev += ev.sum() * math.log1p(-pi)
        ll_cens = np.sum(np.logaddexp(math.log(pi), math.log1p(-pi) + eta[~ev]))
    else:
        ll_cens = np.sum(eta[~ev])
    return float(ll_ev + ll_cens)


def _derivatives(des: _Design, alphas, pi: float, pi_free: bool):
    """Log-likelihood, gradient and Hessian in ``(alpha_1..alpha_k[, pi])``."""
    k = des.k
    am1 = np.asarray(alphas, dtype=float) - 1.0
    L = des.exposure
    eta = -L @ am1
    ev = des.event
    cens = ~ev
    d = np.bincount(des.segment[ev], minlength=k)

    s0 = np.exp(eta[cens])
    s_pop = pi + (1.0 - pi) * s0
    w = (1.0 - pi) * s0 / s_pop
    Lc = L[cens]

    ll = _loglik_design(des, alphas, pi)
    g_alpha = d / am1 - L[ev].sum(axis=0) - (w[:, None] * Lc).sum(axis=0)
    H_alpha = -np.diag(d / am1**2) + (Lc * (w * (1.0 - w))[:, None]).T @ Lc

    if not pi_free:
        return ll, g_alpha, H_alpha

    n_ev = int(ev.sum())
    g_pi = -n_ev / (1.0 - pi) + np.sum((1.0 - s0) / s_pop)
    h_pi_alpha = (Lc * (s0 / s_pop**2)[:, None]).sum(axis=0)
    h_pi_pi = -n_ev / (1.0 - pi) ** 2 - np.sum(((1.0 - s0) / s_pop) ** 2)
    g = np.append(g_alpha, g_pi)
    H = np.zeros((k + 1, k + 1))
    H[:k, :k] = H_alpha
    H[:k, k] = H[k, :k] = h_pi_alpha
    H[k, k] = h_pi_pi
    return ll, g, H


# -- numerical MLE ---------------------------------------------------------------


def _bounds(k: int, pi_free: bool):
    lo = np.full(k + int(pi_free), _ALPHA_FLOOR)
    hi = np.full(k + int(pi_free), ALPHA_MAX)
    if pi_free:
        lo[-1], hi[-1] = 0.0, PI_MAX
    return lo, hi


def _split(theta, k, pi_free):
    return theta[:k], (float(theta[k]) if pi_free else 0.0)


def _projected_gradient(theta, g, lo, hi):
    pg = g.copy()
    pg[(theta <= lo) & (g < 0)] = 0.0
    pg[(theta >= hi) & (g > 0)] = 0.0
    return pg


def _golden_sweep(f, theta, lo, hi):
    """One pass of bounded scalar maximization over each coordinate."""
    theta = theta.copy()
    for j in range(theta.size):

        def neg(v, j=j):
            t = theta.copy()
            t[j] = v
            return -f(t)

        res = minimize_scalar(neg, bounds=(lo[j], hi[j]), method="bounded", options={"xatol": 1e-10})
        if -res.fun >= f(theta):
            theta[j] = res.x
    return theta


def _newton(des, theta0, pi_free, max_iter, gtol):
    k = des.k
    lo, hi = _bounds(k, pi_free)
    theta = np.clip(np.asarray(theta0, dtype=float), lo, hi)

    def f(t):
        a, p = _split(t, k, pi_free)
        return _loglik_design(des, a, p)

    ll, g, H = _derivatives(des, *_split(theta, k, pi_free), pi_free)
    scale = max(1.0, float(len(des.time)))
    for it in range(1, max_iter + 1):
        pg = _projected_gradient(theta, g, lo, hi)
        if np.max(np.abs(pg)) <= gtol * scale:
            return theta, ll, H, True, it - 1
        free = pg != 0.0
        Hf = H[np.ix_(free, free)]
        step = np.zeros_like(theta)
        lam = 0.0
        for _ in range(60):
            try:
                chol = np.linalg.cholesky(-Hf + lam * np.eye(Hf.shape[0]))
            except np.linalg.LinAlgError:
                lam = max(2.0 * lam, 1e-8 * max(1.0, np.max(np.abs(np.diag(Hf)))))
                continue
            step[free] = np.linalg.solve(chol.T, np.linalg.solve(chol, g[free]))
            break
        else:
            step[free] = g[free]

        t = 1.0
        improved = False
        for _ in range(60):
            cand = np.clip(theta + t * step, lo, hi)
            ll_c = f(cand)
            if np.isfinite(ll_c) and ll_c >= ll + 1e-4 * float(g @ (cand - theta)):
                improved = not np.array_equal(cand, theta)
                break
            t *= 0.5
        if not improved:
            cand = _golden_sweep(f, theta, lo, hi)
            ll_c = f(cand)
            if ll_c <= ll:
                # no ascent direction left at machine precision
                pg_now = _projected_gradient(theta, g, lo, hi)
                ok = np.max(np.abs(pg_now)) <= 1e-5 * scale
                return theta, ll, H, ok, it
        theta = cand
        ll, g, H = _derivatives(des, *_split(theta, k, pi_free), pi_free)
    pg = _projected_gradient(theta, g, lo, hi)
    return theta, ll, H, bool(np.max(np.abs(pg)) <= gtol * scale), max_iter


def mle_cure(
    samples,
    x_min: float,
    breaks=(),
    init=None,
    *,
    cure: bool = True,
    max_iter: int = 500,
    gtol: float = 1e-8,
    drop_censored_below: bool = False,
) -> FitResult:
    """Numerical MLE of the exponents and (optionally) the cure fraction.

    Projected Newton ascent with analytic derivatives, bounded to
    ``alpha in (1, 50]`` and ``pi in [0, 1 - 1e-9]``; a bounded coordinate
    search takes over whenever the Newton step fails to improve.

    Parameters
    ----------
    samples
        Right-censored observations.
    x_min, breaks
        Fixed support bound and change points.
    init : sequence, optional
        Starting ``(alpha_1, ..., alpha_k[, pi])``. Defaults to the closed-form
        exponents and half the censoring rate.
    cure : bool
        Estimate the cure fraction; ``False`` fixes it at 0.
    gtol : float
        Tolerance on the projected gradient, per observation.

    Raises
    ------
    ConvergenceError
        If the gradient criterion is not met; ``best`` carries the last fit.
    """
    data = as_survival_data(samples)
    breaks = _as_breaks(breaks)
    des = _design(data, x_min, breaks, drop_censored_below)
    k = des.k
    n, d = _segment_counts(des)
    if np.any(d == 0):
        raise DegenerateError(f"segment {int(np.flatnonzero(d == 0)[0]) + 1} has no events")
    if init is None:
        alphas0, _, _ = closed_form_alphas(data, x_min, breaks, drop_censored_below)
        alphas0 = np.minimum(alphas0, ALPHA_MAX)
        theta0 = np.append(alphas0, 0.5 * (1.0 - des.event.mean())) if cure else alphas0
    else:
        theta0 = np.asarray(init, dtype=float)
        if theta0.size != k + int(cure):
            raise DomainError(f"init must have {k + int(cure)} entries, got {theta0.size}")

    theta, ll, H, ok, iters = _newton(des, theta0, cure, max_iter, gtol)
    alphas, pi = _split(theta, k, cure)

    try:
        cov = np.linalg.inv(-H)
        se = np.sqrt(np.where(np.diag(cov) > 0, np.diag(cov), np.nan))
    except np.linalg.LinAlgError:
        se = np.full(theta.size, np.nan)

    fit = FitResult(
        model=LongTermModel(pi, PiecewisePowerLaw(x_min, breaks, tuple(alphas))),
        segment_n=tuple(int(v) for v in n),
        segment_d=tuple(int(v) for v in d),
        std_errors=tuple(float(v) for v in se[:k]),
        loglik=float(ll),
        n_params=_count_params(k, cure, False),
        pi_free=cure,
        pi_se=float(se[k]) if cure else None,
        converged=ok,
        iterations=iters,
        n_dropped=des.n_dropped,
    )
    if not ok:
        raise ConvergenceError(f"optimizer did not converge after {iters} iterations", best=fit)
    return fit


# -- change-point search ---------------------------------------------------------


def ks_distance(model, curve: KMCurve) -> float:
    """Sup distance between a fitted survival curve and a Kaplan-Meier curve.

    Both one-sided limits of the step function are compared at each event
    time, which is where the supremum over all ``x`` is attained.
    """
    if curve.times.size == 0:
        return 0.0
    t = curve.times
    keep = t >= model.x_min
    t = t[keep]
    s = np.asarray(model.survival_pop(t))
    right = curve.survival[keep]
    left = np.asarray(curve.left_limit(t))
    return float(max(np.max(np.abs(s - right), initial=0.0), np.max(np.abs(s - left), initial=0.0)))


def _admissible(event_times: np.ndarray, x_min: float, breaks, min_events: int) -> bool:
    edges = np.array((x_min,) + tuple(breaks) + (np.inf,))
    counts = np.histogram(event_times, bins=edges)[0]
    return bool(np.all(counts >= min_events))


def _fit_candidate(data, x_min, breaks, cure, curve, drop):
    try:
        fit = mle_cure(data, x_min, breaks, cure=cure, drop_censored_below=drop)
    except ConvergenceError as exc:
        fit = exc.best
    except DegenerateError:
        return None
    return replace(fit, ks=ks_distance(fit.model, curve))


def _scan(data, x_min, candidates, cure, curve, drop, workers):
    def job(b):
        return _fit_candidate(data, x_min, b, cure, curve, drop)

    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            fits = list(ex.map(job, candidates))
    else:
        fits = [job(b) for b in candidates]
    best = None
    for fit in fits:  # candidates are in ascending order, so ties keep the smallest
        if fit is not None and (best is None or fit.ks < best.ks):
            best = fit
    return best


def estimate_changepoints(
    samples,
    x_min: float,
    k: int,
    grid: Sequence[float],
    *,
    cure: bool = True,
    refine: bool = False,
    min_events: int = 3,
    workers: Optional[int] = None,
    drop_censored_below: bool = False,
) -> FitResult:
    """Grid search for ``k - 1`` change points by minimum KS distance to KM.

    All ascending combinations are tried for up to two breaks; further breaks
    are added one at a time with the earlier ones held fixed. Candidates that
    leave fewer than ``min_events`` events in some segment are skipped.
    """
    if k < 2:
        raise DomainError("change-point search needs k >= 2")
    data = as_survival_data(samples)
    grid = sorted({float(g) for g in grid if g > x_min})
    workers = default_workers() if workers is None else max(1, int(workers))
    curve = km_fit(data)
    ev_times = data.time[data.event]

    first = min(k - 1, 2)
    candidates = [
        c for c in itertools.combinations(grid, first) if _admissible(ev_times, x_min, c, min_events)
    ]
    if not candidates:
        raise SearchError("no admissible break combination on the grid")
    best = _scan(data, x_min, candidates, cure, curve, drop_censored_below, workers)
    if best is None:
        raise SearchError("every candidate fit was degenerate")

    while len(best.breaks) < k - 1:
        fixed = best.breaks
        candidates = []
        for g in grid:
            if g in fixed:
                continue
            c = tuple(sorted(fixed + (g,)))
            if _admissible(ev_times, x_min, c, min_events):
                candidates.append(c)
        if not candidates:
            raise SearchError(f"no admissible position for break {len(fixed) + 1}")
        nxt = _scan(data, x_min, candidates, cure, curve, drop_censored_below, workers)
        if nxt is None:
            raise SearchError(f"every candidate for break {len(fixed) + 1} was degenerate")
        best = nxt

    best = replace(best, breaks_searched=True, n_params=_count_params(k, cure, True))
    if refine:
        best = refine_fit(best, data, curve, drop_censored_below=drop_censored_below)
    return best


def refine_fit(
    fit: FitResult,
    samples,
    curve: Optional[KMCurve] = None,
    *,
    alpha_step: float = 0.01,
    pi_step: float = 0.005,
    half_width: int = 10,
    max_sweeps: int = 50,
    drop_censored_below: bool = False,
) -> FitResult:
    """Local grid search around a fit that minimizes the KS distance to KM.

    Each coordinate is scanned over ``half_width`` steps on either side of its
    current value; sweeps repeat until no coordinate improves.
    """
    data = as_survival_data(samples)
    curve = km_fit(data) if curve is None else curve
    base = fit.model.base
    theta = list(base.alphas) + ([fit.pi] if fit.pi_free else [])
    steps = [alpha_step] * base.k + ([pi_step] if fit.pi_free else [])
    lo, hi = _bounds(base.k, fit.pi_free)

    def build(th):
        pi = th[base.k] if fit.pi_free else 0.0
        return LongTermModel(pi, PiecewisePowerLaw(base.x_min, base.breaks, tuple(th[: base.k])))

    best_score = ks_distance(build(theta), curve)
    for _ in range(max_sweeps):
        improved = False
        for j, h in enumerate(steps):
            center = theta[j]
            for m in range(-half_width, half_width + 1):
                v = round(center + m * h, 12)
                if m == 0 or not (lo[j] <= v <= hi[j]):
                    continue
                cand = theta.copy()
                cand[j] = v
                score = ks_distance(build(cand), curve)
                if score < best_score - 1e-15:
                    best_score, theta, improved = score, cand, True
        if not improved:
            break
    model = build(theta)
    return replace(
        fit,
        model=model,
        loglik=loglik(model, data, drop_censored_below),
        ks=best_score,
        refined=True,
    )


# -- model selection and diagnostics ---------------------------------------------


def aic(fit: FitResult, count_breaks: Optional[bool] = None) -> float:
    """Akaike information criterion ``2 p - 2 loglik``.

    ``count_breaks`` overrides whether searched change points add to ``p``.
    """
    if count_breaks is None:
        p = fit.n_params
    else:
        p = _count_params(fit.k, fit.pi_free, fit.breaks_searched and count_breaks)
    return 2.0 * p - 2.0 * fit.loglik


def _log_survival_fn(model):
    if isinstance(model, FitResult):
        model = model.model
    if hasattr(model, "log_survival_pop"):
        return model.log_survival_pop
    if hasattr(model, "log_survival"):
        return model.log_survival
    return lambda x: np.log(model.survival(x))


def cox_snell(fit, samples) -> tuple[np.ndarray, np.ndarray]:
    """Cox-Snell residuals ``-log S(x_i)`` paired with the event indicators."""
    data = as_survival_data(samples)
    with np.errstate(divide="ignore"):
        r = -np.asarray(_log_survival_fn(fit)(data.time), dtype=float)
    if not np.all(np.isfinite(r)):
        raise DegenerateError("fitted survival is zero at an observed time")
    return r, data.event.copy()
