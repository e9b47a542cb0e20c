"""Command-line interface: ``powersurv <command> ...``.

Exit codes: 0 success, 1 usage, 2 data validation, 3 convergence or search
failure. Errors are written to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report
from .analysis import CENSORING_CAVEAT, group_summary, permutation_test, welch_test
from .baseline import saleh_model
from .cure import LongTermModel
from .dataset import Dataset, ingest_csv
from .distribution import PiecewisePowerLaw
from .errors import (
    CalibrationError,
    ConvergenceError,
    DataError,
    DegenerateError,
    DomainError,
    ParameterError,
    SearchError,
)
from .estimation import aic, cox_snell, estimate_changepoints, mle_closed_form, mle_cure, refine_fit
from .nonparam import SurvivalData, km_fit
from .simulate import MCConfig, apply_censoring, calibrate_ymax, mc_study, sample, sample_cure

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIT = 0, 1, 2, 3

_EXIT_CODES = [
    (ParameterError, EXIT_USAGE),
    (DataError, EXIT_DATA),
    (DomainError, EXIT_DATA),
    (ConvergenceError, EXIT_FIT),
    (SearchError, EXIT_FIT),
    (DegenerateError, EXIT_FIT),
    (CalibrationError, EXIT_FIT),
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("grid needs lo <= hi and step > 0")
    return np.round(lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1), 10)


def _onoff(text: str) -> bool:
    if text.lower() in ("on", "true", "yes", "1"):
        return True
    if text.lower() in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _survival_data(ds: Dataset, x_min: float, truncate: bool):
    data = ds.survival
    if not truncate:
        return data, 0
    keep = data.time >= x_min
    return data.subset(keep), int((~keep).sum())


def _fit(data: SurvivalData, args, k=None):
    """Fixed-break or searched fit according to the shared fit flags."""
    if k is None and args.breaks is not None:
        breaks = args.breaks
        if args.cure:
            fit = mle_cure(data, args.xmin, breaks, cure=True)
        else:
            fit = mle_closed_form(data, args.xmin, breaks)
        if args.refine:
            fit = refine_fit(fit, data)
        return fit
    k = k if k is not None else args.k
    if k == 1:
        fit = mle_cure(data, args.xmin, (), cure=True) if args.cure else mle_closed_form(data, args.xmin, ())
        return refine_fit(fit, data) if args.refine else fit
    if args.grid is None:
        raise UsageError("--k needs --grid lo:hi:step")
    fit = estimate_changepoints(
        data, args.xmin, k, args.grid, cure=args.cure, refine=args.refine, workers=args.workers
    )
    if not args.count_breaks:
        fit = replace(fit, n_params=fit.k + int(fit.pi_free))
    return fit


def _emit(payload: dict):
    print(json.dumps(payload))


# -- subcommands -------------------------------------------------------------


def cmd_fit(args) -> int:
    if (args.breaks is None) == (args.k is None):
        raise UsageError("give exactly one of --breaks or --k")
    ds = ingest_csv(args.input)
    data, n_trunc = _survival_data(ds, args.xmin, args.truncate)
    fit = _fit(data, args)
    out = _out_dir(args)
    rep = fit.to_dict(args.level)
    rep["x_min"] = args.xmin
    rep["n_observations"] = len(data)
    rep["n_truncated_below_xmin"] = n_trunc
    x = report.curve_grid(fit.model, args.points)
    surv = report.survival_curve(fit.model, "power-law fit", x)
    haz = report.hazard_curve(fit.model, "power-law fit", x)
    paths = [
        report.write_json(rep, out / "fit_report.json"),
        report.write_json(surv, out / "survival_curve.json"),
        report.write_json(haz, out / "hazard_curve.json"),
    ]
    if args.plot:
        from . import plotting

        km = report.km_curve(km_fit(data), level=args.level)
        paths.append(plotting.plot_curves([km, surv], out / "survival.png", step_names=("kaplan-meier",)))
        paths.append(plotting.plot_curves([haz], out / "hazard.png", ylabel="Hazard"))
    _emit({"outputs": [str(p) for p in paths], "alphas": list(fit.alphas), "breaks": list(fit.breaks),
           "pi": fit.pi, "aic": fit.aic})
    return EXIT_OK


def cmd_km(args) -> int:
    ds = ingest_csv(args.input)
    km = km_fit(ds.survival)
    out = _out_dir(args)
    table = report.km_curve(km, level=args.level)
    paths = [
        report.write_json(table, out / "km.json"),
        report.write_rows(report.km_rows(km, args.level), out / "km.csv"),
    ]
    if args.plot:
        from . import plotting

        paths.append(plotting.plot_curves([table], out / "km.png", step_names=(table["name"],)))
    _emit({"outputs": [str(p) for p in paths]})
    return EXIT_OK


def _residual_entry(name, model, data):
    r, ev = cox_snell(model, data)
    km = km_fit(SurvivalData(np.maximum(r, 1e-300), ev))
    return {
        "name": name,
        "residuals": [float(v) for v in r],
        "event": [int(v) for v in ev],
        "km": report.km_curve(km, name=name),
        "sup_distance_to_exp": float(np.max(np.abs(km.survival - np.exp(-km.times)), initial=0.0)),
    }


def cmd_compare(args) -> int:
    if args.breaks is None and not args.k:
        raise UsageError("give --breaks or --k")
    ds = ingest_csv(args.input)
    data, n_trunc = _survival_data(ds, args.xmin, args.truncate)
    out = _out_dir(args)
    fits = []
    if args.breaks is not None:
        fits.append((f"power-law breaks={','.join(map(str, args.breaks))}", _fit(data, args)))
    for k in args.k or []:
        fits.append((f"power-law k={k}", _fit(data, args, k=k)))

    x = report.curve_grid(fits[0][1].model, args.points)
    km = km_fit(data)
    curves = [report.km_curve(km, level=args.level)]
    curves += [report.survival_curve(f.model, name, x) for name, f in fits]
    hazards = [report.hazard_curve(f.model, name, x) for name, f in fits]
    aic_rows = []
    for name, f in fits:
        aic_rows.append({
            "model": name,
            "k": f.k,
            "breaks": ";".join(repr(b) for b in f.breaks),
            "pi": f.pi,
            "loglik": f.loglik,
            "n_params": f.n_params,
            "aic": f.aic,
            "aic_breaks_not_counted": aic(f, count_breaks=False),
            "convention": f.param_count_convention,
        })
    residuals = [_residual_entry(name, f, data) for name, f in fits]
    if args.saleh:
        mw = saleh_model()
        curves.append(report.survival_curve(mw, "mixture weibull (published)", x))
        hazards.append(report.hazard_curve(mw, "mixture weibull (published)", x))
        ll = float(np.sum(np.log(mw.pdf(data.time[data.event]))) + np.sum(np.log(mw.survival(data.time[~data.event]))))
        aic_rows.append({
            "model": "mixture weibull (published)",
            "k": 2,
            "breaks": "",
            "pi": 0.0,
            "loglik": ll,
            "n_params": 5,
            "aic": 10.0 - 2.0 * ll,
            "aic_breaks_not_counted": 10.0 - 2.0 * ll,
            "convention": "published constants, not refitted",
        })
        residuals.append(_residual_entry("mixture weibull (published)", mw, data))

    paths = [
        report.write_json({"curves": curves}, out / "overlay_curves.json"),
        report.write_json({"curves": hazards}, out / "hazard_curves.json"),
        report.write_json({"rows": aic_rows}, out / "aic_table.json"),
        report.write_rows(aic_rows, out / "aic_table.csv"),
        report.write_json({"models": residuals}, out / "cox_snell.json"),
    ]
    for name, f in fits:
        rep = f.to_dict(args.level)
        rep["x_min"] = args.xmin
        rep["n_observations"] = len(data)
        rep["n_truncated_below_xmin"] = n_trunc
        slug = name.split(" ", 1)[1].replace("=", "").replace(",", "_")
        paths.append(report.write_json(rep, out / f"fit_report_{slug}.json"))
    if args.plot:
        from . import plotting

        paths.append(plotting.plot_curves(curves, out / "overlay.png", step_names=("kaplan-meier",)))
        paths.append(plotting.plot_curves(hazards, out / "hazards.png", ylabel="Hazard"))
        paths.append(plotting.plot_residuals(residuals, out / "cox_snell.png"))
    _emit({"outputs": [str(p) for p in paths], "aic": {r["model"]: r["aic"] for r in aic_rows}})
    return EXIT_OK


def cmd_simulate(args) -> int:
    base = PiecewisePowerLaw(args.xmin, tuple(args.breaks or ()), tuple(args.alphas))
    model = LongTermModel(args.pi, base)
    rng = np.random.default_rng(args.seed)
    y_max = calibrate_ymax(model, args.censor_rate) if args.censor_rate > 0 else None
    if args.pi > 0:
        if args.horizon is None:
            raise UsageError("--pi > 0 needs --horizon")
        data = sample_cure(model, args.n, args.horizon, rng, censor_ymax=y_max)
    else:
        times = sample(base, args.n, rng)
        data = apply_censoring(times, y_max, rng) if y_max is not None else SurvivalData(times, np.ones(args.n, bool))
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = [{"id": str(i + 1), "time_years": repr(float(t)), "event": int(e)} for i, (t, e) in enumerate(data)]
    report.write_rows(rows, out)
    _emit({"outputs": [str(out)], "n": len(rows), "censoring_rate": float(1 - data.event.mean()),
           "y_max": y_max})
    return EXIT_OK


def cmd_mc_study(args) -> int:
    try:
        config = MCConfig.from_json(args.config)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise DataError(f"cannot read config: {exc}") from None
    rep = mc_study(config, workers=args.workers)
    out = _out_dir(args)
    d = rep.to_dict()
    paths = [report.write_json(d, out / "mc_report.json")]
    csv_path = out / "mc_report.csv"
    csv_path.write_text(rep.to_csv())
    paths.append(csv_path)
    if args.plot:
        from . import plotting

        paths.append(plotting.plot_mc(d, out / "mc_report.png"))
    _emit({"outputs": [str(p) for p in paths]})
    return EXIT_OK


def cmd_attr_test(args) -> int:
    ds = ingest_csv(args.input)
    g = ds.groups(args.group_col, args.group_a, args.group_b)
    res = welch_test(g)
    sa, sb = group_summary(g)
    payload = {
        "group_col": args.group_col,
        "groups": [g.label_a, g.label_b],
        "test": "welch",
        "t": res.t,
        "df": res.df,
        "p_value": res.p_value,
        "caveat": CENSORING_CAVEAT,
    }
    if args.permutation:
        payload["permutation_p_value"] = permutation_test(g, args.permutation, args.seed)
        payload["permutation_resamples"] = args.permutation
        payload["seed"] = args.seed
    box = {"groups": [{**s._asdict(), "values": [float(v) for v in t]}
                      for s, t in ((sa, g.times_a), (sb, g.times_b))]}
    out = _out_dir(args)
    paths = [report.write_json(payload, out / "attr_test.json"), report.write_json(box, out / "boxplot.json")]
    if args.plot:
        from . import plotting

        paths.append(plotting.plot_box({g.label_a: list(g.times_a), g.label_b: list(g.times_b)}, out / "boxplot.png"))
    _emit({"outputs": [str(p) for p in paths], "p_value": res.p_value})
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_fit_flags(p, multi_k=False):
    p.add_argument("--input", required=True, help="dataset CSV (time_years, event, ...)")
    p.add_argument("--xmin", type=float, required=True, help="lower support bound in years")
    p.add_argument("--breaks", type=_floats, help="fixed change points, comma-separated")
    if multi_k:
        p.add_argument("--k", type=_ints, help="segment counts to search, comma-separated")
    else:
        p.add_argument("--k", type=int, help="number of segments for the change-point search")
    p.add_argument("--grid", type=_grid, help="search grid lo:hi:step")
    p.add_argument("--cure", type=_onoff, default=True, help="estimate a cure fraction (on/off)")
    p.add_argument("--refine", type=_onoff, default=False, help="local KS grid refinement (on/off)")
    p.add_argument("--count-breaks", type=_onoff, default=True, help="count searched breaks in AIC (on/off)")
    p.add_argument("--truncate", action="store_true", help="drop observations below --xmin")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--points", type=int, default=report.DEFAULT_POINTS)
    p.add_argument("--workers", type=int, default=None, help="threads for the grid search")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--plot", action="store_true", help="also render PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="powersurv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit the power-law model")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("km", help="Kaplan-Meier table")
    p.add_argument("--input", required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", default=".")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_km)

    p = sub.add_parser("compare", help="overlay fitted models, KM and the mixture-Weibull baseline")
    _add_fit_flags(p, multi_k=True)
    p.add_argument("--saleh", type=_onoff, default=True, help="include the published mixture Weibull")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="draw a censored sample")
    p.add_argument("--xmin", type=float, required=True)
    p.add_argument("--breaks", type=_floats, default=[])
    p.add_argument("--alphas", type=_floats, required=True)
    p.add_argument("--pi", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--censor-rate", type=float, default=0.0)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="samples.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc-study", help="Monte Carlo bias/RMSE/coverage study")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_mc_study)

    p = sub.add_parser("attr-test", help="compare mean times between two attribute groups")
    p.add_argument("--input", required=True)
    p.add_argument("--group-col", required=True)
    p.add_argument("--group-a", required=True)
    p.add_argument("--group-b", default=None, help="defaults to every other value")
    p.add_argument("--permutation", type=int, default=0, help="permutation resamples (0 = off)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_attr_test)
    return parser


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    row = getattr(exc, "row", None)
    if row is not None:
        payload["row"] = row
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail(exc, EXIT_USAGE)
    except FileNotFoundError as exc:
        return _fail(exc, EXIT_DATA)
    except Exception as exc:
        for cls, code in _EXIT_CODES:
            if isinstance(exc, cls):
                return _fail(exc, code)
        raise


if __name__ == "__main__":
    sys.exit(main())
