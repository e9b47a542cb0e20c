"""Render the emitted plot-data tables to image files."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update(
    {
        "font.size": 10,
        "axes.labelsize": 10,
        "legend.fontsize": 8,
        "xtick.labelsize": 8,
        "ytick.labelsize": 8,
        "figure.figsize": (6.0, 4.0),
        "savefig.dpi": 150,
    }
)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_curves(curves: list[dict], path, ylabel="Survival", xlabel="Years", logx=False, step_names=()):
    fig, ax = plt.subplots()
    for c in curves:
        step = c["name"] in step_names
        draw = ax.step if step else ax.plot
        kw = {"where": "post"} if step else {}
        draw(c["x"], c["y"], label=c["name"], **kw)
        if "bands" in c:
            ax.fill_between(c["x"], c["bands"]["lo"], c["bands"]["hi"], alpha=0.2,
                            step="post" if step else None)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    return _save(fig, path)


def plot_mc(report: dict, path):
    """Bias and RMSE against sample size, one column per parameter."""
    cells = report["cells"]
    params = list(dict.fromkeys(c["parameter"] for c in cells))
    fig, axes = plt.subplots(2, len(params), squeeze=False, figsize=(3.2 * len(params), 5.0))
    for j, p in enumerate(params):
        rows = [c for c in cells if c["parameter"] == p]
        n = [c["n"] for c in rows]
        axes[0, j].plot(n, [c["bias"] for c in rows], "o-")
        axes[0, j].axhline(0.0, color="grey", lw=0.8)
        axes[0, j].set_title(p)
        axes[0, j].set_ylabel("Bias")
        axes[1, j].plot(n, [c["rmse"] for c in rows], "o-")
        axes[1, j].axhline(0.0, color="grey", lw=0.8)
        axes[1, j].set_ylabel("RMSE")
        axes[1, j].set_xlabel("n")
    return _save(fig, path)


def plot_box(groups: dict[str, list[float]], path, ylabel="Years"):
    fig, ax = plt.subplots()
    ax.boxplot(list(groups.values()))
    ax.set_xticks(range(1, len(groups) + 1), list(groups))
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def plot_residuals(residuals: list[dict], path):
    """KM of Cox-Snell residuals against the unit exponential reference."""
    fig, ax = plt.subplots()
    top = 0.0
    for r in residuals:
        ax.step(r["km"]["x"], r["km"]["y"], where="post", label=r["name"])
        top = max(top, max(r["km"]["x"]))
    xs = [top * i / 200 for i in range(201)]
    ax.plot(xs, [math.exp(-x) for x in xs], "k--", label="exp(-r)")
    ax.set_xlabel("Cox-Snell residual")
    ax.set_ylabel("Survival of residuals")
    ax.legend()
    return _save(fig, path)
