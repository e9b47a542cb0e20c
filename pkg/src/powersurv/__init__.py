"""Piecewise power-law survival models with change points and cure fractions."""

from .baseline import MixtureWeibull, WeibullComponent, saleh_model
from .cure import LongTermModel
from .distribution import PiecewisePowerLaw, new_model
from .errors import (
    CalibrationError,
    ConvergenceError,
    DataError,
    DegenerateError,
    DivergentMomentError,
    DomainError,
    ParameterError,
    PowerSurvError,
    SearchError,
)
from .estimation import (
    FitResult,
    aic,
    cox_snell,
    estimate_changepoints,
    fisher_ci,
    ks_distance,
    loglik,
    mle_closed_form,
    mle_cure,
    refine_fit,
)
from .nonparam import KMCurve, SurvivalData, SurvivalSample, censoring_rate, km_eval, km_fit
from .simulate import MCConfig, MCReport, apply_censoring, calibrate_ymax, mc_study, sample, sample_cure

__version__ = "0.1.0"
