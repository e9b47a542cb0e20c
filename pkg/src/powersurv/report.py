"""Plot-data tables and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .nonparam import KMCurve

DEFAULT_POINTS = 400


def curve_grid(model, points: int = DEFAULT_POINTS, upper_quantile: float = 0.999) -> np.ndarray:
    """Log-spaced grid from ``x_min`` to the base model's ``upper_quantile``."""
    base = getattr(model, "base", model)
    hi = float(base.quantile(upper_quantile))
    return np.geomspace(base.x_min, hi, points)


def curve(name: str, x, y, bands=None) -> dict:
    out = {"name": name, "x": [float(v) for v in x], "y": [float(v) for v in y]}
    if bands is not None:
        lo, hi = bands
        out["bands"] = {"lo": [float(v) for v in lo], "hi": [float(v) for v in hi]}
    return out


def survival_curve(model, name: str, x) -> dict:
    fn = getattr(model, "survival_pop", None) or model.survival
    return curve(name, x, fn(x))


def hazard_curve(model, name: str, x) -> dict:
    fn = getattr(model, "hazard_pop", None) or model.hazard
    return curve(name, x, fn(x))


def km_curve(km: KMCurve, name: str = "kaplan-meier", level: float = 0.95) -> dict:
    """KM step points, starting from ``(0, 1)``, with pointwise bands."""
    lo, hi = km.bands(level)
    x = np.concatenate([[0.0], km.times])
    y = np.concatenate([[1.0], km.survival])
    return curve(name, x, y, (np.concatenate([[1.0], lo]), np.concatenate([[1.0], hi])))


def km_rows(km: KMCurve, level: float = 0.95) -> list[dict]:
    lo, hi = km.bands(level)
    return [
        {
            "time": float(t),
            "at_risk": int(n),
            "deaths": int(d),
            "survival": float(s),
            "variance": float(v),
            "lower": float(a),
            "upper": float(b),
        }
        for t, n, d, s, v, a, b in zip(km.times, km.at_risk, km.deaths, km.survival, km.variance, lo, hi)
    ]


def _clean(obj):
    """Replace non-finite floats with ``None`` so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n")
    return path


def write_rows(rows: list[dict], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if rows:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return path


def load_schema(name: str) -> dict:
    return json.loads(resources.files("powersurv.schemas").joinpath(f"{name}.json").read_text())
