"""Exception types shared across the package."""


class PowerSurvError(Exception):
    """Base class for all package errors."""


class ParameterError(PowerSurvError, ValueError):
    """Invalid model parameter. ``field`` names the offending parameter."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DomainError(PowerSurvError, ValueError):
    """Argument outside the support of a function."""


class DivergentMomentError(PowerSurvError, ValueError):
    """Requested moment is infinite for the given model."""


class DegenerateError(PowerSurvError, ValueError):
    """Data carry no information about a parameter (e.g. a segment without events)."""


class ConvergenceError(PowerSurvError, RuntimeError):
    """Numerical optimizer failed. ``best`` holds the best iterate reached."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SearchError(PowerSurvError, RuntimeError):
    """No admissible candidate in a change-point search."""


class CalibrationError(PowerSurvError, RuntimeError):
    """Censoring target cannot be reached on the search bracket."""


class DataError(PowerSurvError, ValueError):
    """Invalid input dataset. ``row`` is the 1-based data row when known."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row
