"""Long-term survivor (cure fraction) mixture over a piecewise power law."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import PiecewisePowerLaw, _as_float_array, _ret
from .errors import ParameterError

__all__ = ["LongTermModel"]


@dataclass(frozen=True)
class LongTermModel:
    """Population in which a fraction ``pi`` never experiences the event.

    ``survival_pop(x) = pi + (1 - pi) * base.survival(x)``; the density is
    improper and integrates to ``1 - pi``.
    """

    pi: float
    base: PiecewisePowerLaw

    def __post_init__(self):
        pi = float(self.pi)
        if not (0.0 <= pi < 1.0):
            raise ParameterError("pi", f"cure fraction must lie in [0, 1), got {self.pi}")
        if not isinstance(self.base, PiecewisePowerLaw):
            raise ParameterError("base", "must be a PiecewisePowerLaw")
        object.__setattr__(self, "pi", pi)

    @property
    def x_min(self) -> float:
        return self.base.x_min

    def log_survival_pop(self, x):
        arr, scalar = _as_float_array(x)
        log_s0 = np.asarray(self.base.log_survival(arr))
        if self.pi == 0.0:
            return _ret(log_s0, scalar)
        out = np.logaddexp(math.log(self.pi), math.log1p(-self.pi) + log_s0)
        return _ret(out, scalar)

    def survival_pop(self, x):
        arr, scalar = _as_float_array(x)
        return _ret(np.exp(np.asarray(self.log_survival_pop(arr))), scalar)

    def log_pdf_pop(self, x):
        arr, scalar = _as_float_array(x)
        out = math.log1p(-self.pi) + np.asarray(self.base.log_pdf(arr))
        return _ret(out, scalar)

    def pdf_pop(self, x):
        arr, scalar = _as_float_array(x)
        return _ret(np.exp(np.asarray(self.log_pdf_pop(arr))), scalar)

    def hazard_pop(self, x):
        arr, scalar = _as_float_array(x)
        if self.pi == 0.0:
            return _ret(np.asarray(self.base.hazard(arr)), scalar)
        out = np.exp(np.asarray(self.log_pdf_pop(arr)) - np.asarray(self.log_survival_pop(arr)))
        return _ret(out, scalar)

    def to_dict(self) -> dict:
        return {"pi": self.pi, "base": self.base.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "LongTermModel":
        return cls(d.get("pi", 0.0), PiecewisePowerLaw.from_dict(d["base"]))
