import json

import jsonschema
import numpy as np
import pytest

from powersurv.cli import main
from powersurv.dataset import ingest_csv, write_csv
from powersurv.report import load_schema

SCHEMA_FOR = {
    "fit_report": "fit_report",
    "survival_curve": "curve",
    "hazard_curve": "curve",
    "km": "curve",
    "overlay_curves": "curve_set",
    "hazard_curves": "curve_set",
    "aic_table": "aic_table",
    "cox_snell": "cox_snell",
    "mc_report": "mc_report",
    "attr_test": "attr_test",
    "boxplot": "boxplot",
}


def _schema_name(path):
    stem = path.stem
    return "fit_report" if stem.startswith("fit_report") else SCHEMA_FOR[stem]


def validate_outputs(out_dir):
    checked = 0
    for path in sorted(out_dir.glob("*.json")):
        jsonschema.validate(json.loads(path.read_text()), load_schema(_schema_name(path)))
        checked += 1
    return checked


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def simulated(tmp_path_factory, capsys):
    path = tmp_path_factory.mktemp("sim") / "samples.csv"
    code, _, _ = _run(capsys, "simulate", "--xmin", 0.5, "--breaks", 13, "--alphas", "1.4,6", "--pi", 0.25,
                      "--horizon", 40, "--n", 1500, "--censor-rate", 0.35, "--seed", 7, "--output", path)
    assert code == 0
    return path


def test_km_three_rows(tmp_path, capsys):
    path = _write(tmp_path / "d.csv", "id,time_years,event\na,1,1\nb,2,1\nc,3,1\n")
    code, _, _ = _run(capsys, "km", "--input", path, "--out", tmp_path / "o")
    assert code == 0
    lines = (tmp_path / "o" / "km.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    assert [float(r["time"]) for r in rows] == [1.0, 2.0, 3.0]
    assert [float(r["survival"]) for r in rows] == [2 / 3, 1 / 3, 0.0]
    assert [int(r["at_risk"]) for r in rows] == [3, 2, 1]
    curve = json.loads((tmp_path / "o" / "km.json").read_text())
    assert curve["x"][0] == 0.0 and curve["y"][0] == 1.0
    assert validate_outputs(tmp_path / "o") == 1


def test_event_out_of_range_names_row(tmp_path, capsys):
    path = _write(tmp_path / "d.csv", "time_years,event\n1,1\n2,0\n3,2\n")
    code, out, err = _run(capsys, "km", "--input", path, "--out", tmp_path)
    assert code == 2
    payload = json.loads(err)
    jsonschema.validate(payload, load_schema("error"))
    assert payload["row"] == 3
    assert "row 3" in payload["message"]


@pytest.mark.parametrize(
    "text",
    ["time_years\n1\n", "time_years,event\n-1,1\n", "id,time_years,event\nx,1,1\nx,2,0\n", "time_years,event\nabc,1\n"],
)
def test_data_errors_exit_2(tmp_path, capsys, text):
    code, _, err = _run(capsys, "km", "--input", _write(tmp_path / "d.csv", text), "--out", tmp_path)
    assert code == 2
    assert json.loads(err)["exit_code"] == 2


def test_missing_file_exit_2(tmp_path, capsys):
    code, _, _ = _run(capsys, "km", "--input", tmp_path / "nope.csv")
    assert code == 2


def test_usage_errors_exit_1(tmp_path, capsys, simulated):
    assert _run(capsys, "fit")[0] == 1
    assert _run(capsys, "no-such-command")[0] == 1
    code, _, err = _run(capsys, "fit", "--input", simulated, "--xmin", 0.5, "--out", tmp_path)
    assert code == 1
    assert json.loads(err)["error"] == "UsageError"
    assert _run(capsys, "fit", "--input", simulated, "--xmin", 0.5, "--k", 2, "--grid", "1:x", "--out", tmp_path)[0] == 1


def test_search_failure_exit_3(tmp_path, capsys):
    path = _write(tmp_path / "d.csv", "time_years,event\n1,1\n2,1\n3,1\n")
    code, _, err = _run(capsys, "fit", "--input", path, "--xmin", 0.5, "--k", 2, "--grid", "1.5:2.5:1",
                        "--out", tmp_path)
    assert code == 3
    assert json.loads(err)["error"] == "SearchError"


def test_degenerate_exit_3(tmp_path, capsys):
    path = _write(tmp_path / "d.csv", "time_years,event\n1,0\n2,0\n30,1\n")
    code, _, _ = _run(capsys, "fit", "--input", path, "--xmin", 0.5, "--breaks", 10, "--out", tmp_path)
    assert code == 3


def test_below_xmin_is_data_error_unless_truncated(tmp_path, capsys, simulated):
    code, _, _ = _run(capsys, "fit", "--input", simulated, "--xmin", 0.5, "--breaks", 13, "--out", tmp_path)
    assert code == 2
    code, _, _ = _run(capsys, "fit", "--input", simulated, "--xmin", 0.5, "--breaks", 13, "--truncate",
                      "--out", tmp_path)
    assert code == 0
    rep = json.loads((tmp_path / "fit_report.json").read_text())
    assert rep["n_truncated_below_xmin"] > 0


def test_simulate_fit_round_trip(tmp_path, capsys):
    path = tmp_path / "s.csv"
    code, out, _ = _run(capsys, "simulate", "--xmin", 0.5, "--breaks", 13, "--alphas", "1.4,6", "--pi", 0.25,
                        "--horizon", 60, "--n", 5000, "--seed", 11, "--output", path)
    assert code == 0
    assert json.loads(out)["n"] == 5000
    code, _, _ = _run(capsys, "fit", "--input", path, "--xmin", 0.5, "--breaks", 13, "--cure", "on",
                      "--out", tmp_path / "fit")
    assert code == 0
    rep = json.loads((tmp_path / "fit" / "fit_report.json").read_text())
    truth = {"alpha_1": 1.4, "alpha_2": 6.0, "pi": 0.25}
    for name, value in truth.items():
        est = rep["pi"] if name == "pi" else rep["alphas"][int(name[-1]) - 1]
        assert abs(est - value) < 3 * rep["std_errors"][name]
    assert rep["aic"] == 2 * rep["n_params"] - 2 * rep["loglik"]
    assert validate_outputs(tmp_path / "fit") == 3


def test_simulate_is_deterministic(tmp_path, capsys):
    args = ["simulate", "--xmin", 0.5, "--breaks", 13, "--alphas", "1.3,6", "--n", 200, "--censor-rate", 0.37]
    _run(capsys, *args, "--seed", 3, "--output", tmp_path / "a.csv")
    _run(capsys, *args, "--seed", 3, "--output", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_fit_search_and_compare(tmp_path, capsys, simulated):
    out = tmp_path / "cmp"
    code, stdout, _ = _run(capsys, "compare", "--input", simulated, "--xmin", 0.5, "--truncate", "--k", "1,2",
                           "--grid", "2:30:1", "--out", out)
    assert code == 0
    names = {p.name for p in out.glob("*.json")}
    assert {"overlay_curves.json", "hazard_curves.json", "aic_table.json", "cox_snell.json",
            "fit_report_k1.json", "fit_report_k2.json"} <= names
    assert validate_outputs(out) == len(names)
    rows = json.loads((out / "aic_table.json").read_text())["rows"]
    by_model = {r["model"]: r for r in rows}
    assert by_model["power-law k=2"]["aic"] < by_model["power-law k=1"]["aic"]
    assert by_model["power-law k=2"]["n_params"] == 4
    assert by_model["power-law k=2"]["aic_breaks_not_counted"] == by_model["power-law k=2"]["aic"] - 2
    curves = json.loads((out / "overlay_curves.json").read_text())["curves"]
    assert len(curves[1]["x"]) == 400
    assert curves[1]["x"][0] == 0.5


def test_count_breaks_off(tmp_path, capsys, simulated):
    code, _, _ = _run(capsys, "fit", "--input", simulated, "--xmin", 0.5, "--truncate", "--k", 2, "--grid", "5:20:1",
                      "--count-breaks", "off", "--out", tmp_path)
    assert code == 0
    rep = json.loads((tmp_path / "fit_report.json").read_text())
    assert rep["n_params"] == 3
    assert "searched breaks" not in rep["param_count_convention"]


def test_plots_are_rendered(tmp_path, capsys, simulated):
    code, _, _ = _run(capsys, "fit", "--input", simulated, "--xmin", 0.5, "--breaks", 13, "--truncate", "--plot",
                      "--out", tmp_path)
    assert code == 0
    for name in ("survival.png", "hazard.png"):
        assert (tmp_path / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_mc_study_command(tmp_path, capsys):
    cfg = {"x_min": 0.5, "breaks": [13], "alphas": [1.3, 6], "sample_sizes": [100, 300], "replications": 50,
           "censoring": 0.37, "seed": 1}
    jsonschema.validate(cfg, load_schema("mc_config"))
    path = _write(tmp_path / "cfg.json", json.dumps(cfg))
    code, _, _ = _run(capsys, "mc-study", "--config", path, "--workers", 1, "--out", tmp_path / "mc")
    assert code == 0
    assert validate_outputs(tmp_path / "mc") == 1
    assert (tmp_path / "mc" / "mc_report.csv").read_text().splitlines()[0] == "parameter,n,bias,rmse,coverage,dropped"
    bad = _write(tmp_path / "bad.json", json.dumps({**cfg, "replications": 0}))
    assert _run(capsys, "mc-study", "--config", bad, "--out", tmp_path)[0] == 1


def test_attr_test_command(tmp_path, capsys):
    rng = np.random.default_rng(0)
    lines = ["id,time_years,event,era"]
    for i in range(40):
        era = "dominate" if i % 2 else "principate"
        t = rng.gamma(2.0, 5.5 if era == "dominate" else 3.5) + 0.1
        lines.append(f"{i},{t!r},{int(rng.random() < 0.6)},{era}")
    path = _write(tmp_path / "attrs.csv", "\n".join(lines) + "\n")
    code, out, _ = _run(capsys, "attr-test", "--input", path, "--group-col", "era", "--group-a", "dominate",
                        "--group-b", "principate", "--permutation", 500, "--out", tmp_path / "a")
    assert code == 0
    assert validate_outputs(tmp_path / "a") == 2
    payload = json.loads((tmp_path / "a" / "attr_test.json").read_text())
    assert payload["groups"] == ["dominate", "principate"]
    assert "caveat" in payload
    code, _, _ = _run(capsys, "attr-test", "--input", path, "--group-col", "nope", "--group-a", "x",
                      "--out", tmp_path / "a")
    assert code == 2


def test_ingest_round_trip(tmp_path):
    src = _write(
        tmp_path / "in.csv",
        'id,name,time_years,event,accession,era\n1,"Augustus, first",40.55,0,adoption,principate\n'
        "2,Caligula,3.8333333333333335,1,birthright,principate\n3,X,0.1,1,,dominate\n",
    )
    ds = ingest_csv(src)
    assert len(ds) == 3
    write_csv(ds, tmp_path / "out.csv")
    again = ingest_csv(tmp_path / "out.csv")
    assert again.ids == ds.ids and again.names == ds.names
    assert np.array_equal(again.time, ds.time) and np.array_equal(again.event, ds.event)
    assert again.attributes == ds.attributes
    write_csv(again, tmp_path / "out2.csv")
    assert (tmp_path / "out.csv").read_text() == (tmp_path / "out2.csv").read_text()
