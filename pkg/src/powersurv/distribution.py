"""Piecewise power-law lifetime distribution with change points.

A model with ``k`` segments is described by a lower support bound ``x_min``,
``k - 1`` ascending break points and ``k`` exponents. Inside segment ``i``
(the interval ``[b_{i-1}, b_i)`` with ``b_0 = x_min``) the survival function is
``C_{i-1} * (x / b_{i-1}) ** (1 - alpha_i)`` where the constants ``C_j`` make the
survival function continuous. Segments are closed on the left, so a break
point belongs to the segment on its right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DivergentMomentError, DomainError, ParameterError

__all__ = ["PiecewisePowerLaw", "new_model"]

# |r - alpha + 1| below this switches the moment integral to its log form
_LOG_CASE_TOL = 1e-12


def _as_float_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


@dataclass(frozen=True)
class PiecewisePowerLaw:
    """k-segment power-law distribution.

    Parameters
    ----------
    x_min : float
        Lower bound of the support, ``x_min > 0``.
    breaks : sequence of float
        Strictly ascending change points, each greater than ``x_min``.
    alphas : sequence of float
        Scaling exponents, one per segment, each greater than 1.
    """

    x_min: float
    breaks: tuple[float, ...] = ()
    alphas: tuple[float, ...] = (2.0,)
    log_constants: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x_min = float(self.x_min)
        breaks = tuple(float(b) for b in self.breaks)
        alphas = tuple(float(a) for a in self.alphas)
        if not (math.isfinite(x_min) and x_min > 0):
            raise ParameterError("x_min", f"must be positive and finite, got {self.x_min}")
        if len(alphas) != len(breaks) + 1:
            raise ParameterError(
                "alphas",
                f"expected {len(breaks) + 1} exponents for {len(breaks)} breaks, got {len(alphas)}",
            )
        if any(not math.isfinite(b) for b in breaks):
            raise ParameterError("breaks", "must be finite")
        if breaks and breaks[0] <= x_min:
            raise ParameterError("breaks", f"first break {breaks[0]} must exceed x_min={x_min}")
        if any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise ParameterError("breaks", f"must be strictly ascending, got {list(breaks)}")
        if any(not (math.isfinite(a) and a > 1) for a in alphas):
            raise ParameterError("alphas", f"every exponent must be > 1, got {list(alphas)}")

        edges = (x_min,) + breaks
        logc = [0.0]
        for j in range(1, len(alphas)):
            logc.append(logc[-1] + (1.0 - alphas[j - 1]) * math.log(edges[j] / edges[j - 1]))

        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "log_constants", tuple(logc))

    # -- structure ---------------------------------------------------------

    @property
    def k(self) -> int:
        """Number of segments."""
        return len(self.alphas)

    @property
    def edges(self) -> tuple[float, ...]:
        """Left endpoints of the segments, ``(x_min, *breaks)``."""
        return (self.x_min,) + self.breaks

    @property
    def constants(self) -> tuple[float, ...]:
        """Continuity constants ``C_0 = 1, C_1, ..., C_{k-1}``."""
        return tuple(math.exp(c) for c in self.log_constants)

    def segment_index(self, x) -> np.ndarray:
        """0-based segment index of each ``x`` (break points go to the right)."""
        return np.searchsorted(np.asarray(self.edges), np.asarray(x, dtype=float), side="right") - 1

    def _checked(self, x):
        arr, scalar = _as_float_array(x)
        if np.any(np.isnan(arr)) or np.any(arr < self.x_min):
            raise DomainError(f"x must be >= x_min={self.x_min}")
        return arr, scalar

    # -- evaluation --------------------------------------------------------

    def log_survival(self, x):
        """Natural log of the survival function."""
        arr, scalar = self._checked(x)
        idx = self.segment_index(arr)
        edges = np.asarray(self.edges)
        alphas = np.asarray(self.alphas)
        logc = np.asarray(self.log_constants)
        out = logc[idx] + (1.0 - alphas[idx]) * np.log(arr / edges[idx])
        return _ret(out, scalar)

    def survival(self, x):
        """Survival function ``S(x) = P(X > x)``."""
        arr, scalar = _as_float_array(x)
        return _ret(np.exp(np.asarray(self.log_survival(arr))), scalar)

    def log_pdf(self, x):
        arr, scalar = self._checked(x)
        idx = self.segment_index(arr)
        alphas = np.asarray(self.alphas)
        out = np.log(alphas[idx] - 1.0) - np.log(arr) + np.asarray(self.log_survival(arr))
        return _ret(out, scalar)

    def pdf(self, x):
        """Probability density. At a break the right segment's formula applies."""
        arr, scalar = _as_float_array(x)
        return _ret(np.exp(np.asarray(self.log_pdf(arr))), scalar)

    def hazard(self, x):
        """Hazard rate ``(alpha_i - 1) / x`` for ``x`` in segment ``i``."""
        arr, scalar = self._checked(x)
        alphas = np.asarray(self.alphas)
        return _ret((alphas[self.segment_index(arr)] - 1.0) / arr, scalar)

    def cdf(self, x):
        arr, scalar = _as_float_array(x)
        return _ret(-np.expm1(np.asarray(self.log_survival(arr))), scalar)

    def quantile(self, u):
        """Inverse CDF: the ``x`` with ``survival(x) == 1 - u``, for ``0 <= u < 1``."""
        arr, scalar = _as_float_array(u)
        if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr >= 1):
            raise DomainError("u must lie in [0, 1)")
        log_s = np.log1p(-arr)
        logc = np.asarray(self.log_constants)
        # segment j holds survival values in (C_{j+1}, C_j]
        idx = np.searchsorted(-logc, -log_s, side="right") - 1
        idx = np.clip(idx, 0, self.k - 1)
        edges = np.asarray(self.edges)
        alphas = np.asarray(self.alphas)
        with np.errstate(over="ignore"):
            out = edges[idx] * np.exp((log_s - logc[idx]) / (1.0 - alphas[idx]))
        return _ret(out, scalar)

    # -- moments -----------------------------------------------------------

    def moment(self, r: float) -> float:
        """Raw moment ``E[X**r]``; finite only when ``r < alpha_k - 1``."""
        r = float(r)
        if not r > 0:
            raise DomainError(f"moment order must be positive, got {r}")
        last = self.alphas[-1]
        if r >= last - 1.0:
            raise DivergentMomentError(
                f"moment of order {r} diverges: requires r < alpha_k - 1 = {last - 1.0}"
            )
        edges = self.edges
        uppers = self.breaks + (math.inf,)
        total = 0.0
        for lo, hi, a, logc in zip(edges, uppers, self.alphas, self.log_constants):
            # substitute x = lo * t; integrand C (a-1) lo^r t^(r-a) over t in [1, hi/lo]
            scale = math.exp(logc + r * math.log(lo)) * (a - 1.0)
            e = r - a + 1.0
            if math.isinf(hi):
                total += scale / (a - r - 1.0)
            elif abs(e) < _LOG_CASE_TOL:
                total += scale * math.log(hi / lo)
            else:
                total += scale * math.expm1(e * math.log(hi / lo)) / e
        return total

    def mean(self) -> float:
        return self.moment(1)

    def variance(self) -> float:
        m1 = self.moment(1)
        return self.moment(2) - m1 * m1

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "breaks": list(self.breaks), "alphas": list(self.alphas)}

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePowerLaw":
        return cls(d["x_min"], tuple(d.get("breaks", ())), tuple(d["alphas"]))


def new_model(x_min: float, breaks: Sequence[float], alphas: Sequence[float]) -> PiecewisePowerLaw:
    """Build and validate a :class:`PiecewisePowerLaw`."""
    return PiecewisePowerLaw(x_min, tuple(breaks), tuple(alphas))
