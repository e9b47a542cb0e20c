"""Fixed mixture-of-Weibulls comparison model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .distribution import _as_float_array, _ret
from .errors import DomainError, ParameterError

__all__ = ["WeibullComponent", "MixtureWeibull", "saleh_model"]


class WeibullComponent(NamedTuple):
    weight: float
    scale: float
    shape: float


@dataclass(frozen=True)
class MixtureWeibull:
    """``S(x) = sum_j w_j exp(-(x / scale_j) ** shape_j)``."""

    components: tuple[WeibullComponent, ...]

    def __post_init__(self):
        comps = tuple(WeibullComponent(*map(float, c)) for c in self.components)
        if not comps:
            raise ParameterError("components", "at least one component is required")
        for c in comps:
            if not (0.0 < c.weight <= 1.0):
                raise ParameterError("components", f"weight must lie in (0, 1], got {c.weight}")
            if c.scale <= 0 or c.shape <= 0:
                raise ParameterError("components", "scale and shape must be positive")
        if abs(math.fsum(c.weight for c in comps) - 1.0) > 1e-12:
            raise ParameterError("components", "weights must sum to 1")
        object.__setattr__(self, "components", comps)

    x_min = 0.0

    def _checked(self, x):
        arr, scalar = _as_float_array(x)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise DomainError("x must be non-negative")
        return arr, scalar

    def survival(self, x):
        arr, scalar = self._checked(x)
        out = np.zeros_like(arr)
        for w, lam, beta in self.components:
            out = out + w * np.exp(-((arr / lam) ** beta))
        return _ret(out, scalar)

    def pdf(self, x):
        arr, scalar = self._checked(x)
        out = np.zeros_like(arr)
        for w, lam, beta in self.components:
            z = arr / lam
            with np.errstate(divide="ignore", invalid="ignore"):
                term = w * beta / lam * z ** (beta - 1.0) * np.exp(-(z**beta))
            at_zero = np.inf if beta < 1 else (w / lam if beta == 1 else 0.0)
            out = out + np.where(arr > 0, term, at_zero)
        return _ret(out, scalar)

    def _log_terms(self, arr):
        """Per-component ``log(w S_j)`` and ``log(w f_j)`` for ``arr > 0``."""
        log_s, log_f = [], []
        for w, lam, beta in self.components:
            z = arr / lam
            zb = z**beta
            log_s.append(math.log(w) - zb)
            log_f.append(math.log(w * beta / lam) + (beta - 1.0) * np.log(z) - zb)
        return np.array(log_s), np.array(log_f)

    def hazard(self, x):
        arr, scalar = self._checked(x)
        pos = arr > 0
        out = np.asarray(self.pdf(np.where(pos, 1.0, arr)), dtype=float).copy()
        if np.any(pos):
            log_s, log_f = self._log_terms(arr[pos])
            out[pos] = np.exp(logsumexp(log_f, axis=0) - logsumexp(log_s, axis=0))
        return _ret(out, scalar)

    # the long-term interface lets the baseline sit next to fitted models
    survival_pop = survival
    pdf_pop = pdf
    hazard_pop = hazard

    def log_survival_pop(self, x):
        arr, scalar = self._checked(x)
        out = np.zeros_like(arr)
        pos = arr > 0
        if np.any(pos):
            out[pos] = logsumexp(self._log_terms(arr[pos])[0], axis=0)
        return _ret(out, scalar)

    def log_pdf_pop(self, x):
        return np.log(self.pdf(x))

    def to_dict(self) -> dict:
        return {"components": [c._asdict() for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureWeibull":
        return cls(tuple(WeibullComponent(**c) for c in d["components"]))


def saleh_model() -> MixtureWeibull:
    """Two-component mixture with fixed published constants."""
    return MixtureWeibull(
        (
            WeibullComponent(0.876, 12.835, 0.618),
            WeibullComponent(0.124, 14.833, 13.387),
        )
    )
