import json
import math

import numpy as np
import pytest
from scipy import integrate

from powersurv import (
    CalibrationError,
    LongTermModel,
    MCConfig,
    ParameterError,
    apply_censoring,
    calibrate_ymax,
    mc_study,
    new_model,
    sample,
    sample_cure,
)
from powersurv.simulate import censoring_probability, expected_min, replication_seed
from oracles import random_model, ref_survival

REFERENCE_MODEL = new_model(0.5, [13.0], [1.3, 6.0])


def test_sample_is_deterministic():
    m = new_model(1, [2], [2, 3])
    a = sample(m, 1000, seed=42)
    b = sample(m, 1000, seed=42)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample(m, 1000, seed=43))
    # frozen draws guard the generator contract across platforms
    np.testing.assert_array_equal(
        sample(new_model(1, [], [2]), 3, seed=0), 1 / (1 - np.random.default_rng(0).random(3))
    )


def test_sample_survival_at_break():
    t = sample(new_model(1, [2], [2, 3]), 100_000, seed=1)
    assert abs(np.mean(t > 2) - 0.5) < 0.01
    assert t.min() >= 1.0


def test_sample_mean():
    t = sample(new_model(1, [], [3]), 100_000, seed=2)
    assert abs(t.mean() - 2.0) < 0.02


def test_sample_cure_boundaries():
    base = new_model(1, [], [2])
    data = sample_cure(LongTermModel(1 - 1e-9, base), 10_000, horizon=50.0, seed=3)
    assert not data.event.any()
    assert np.all(data.time == 50.0)
    with pytest.raises(ParameterError):
        sample_cure(LongTermModel(0.2, base), 10, horizon=1.0, seed=0)


def test_sample_cure_without_cure_reduces_to_sample():
    base = new_model(0.5, [13], [1.4, 6])
    data = sample_cure(LongTermModel(0.0, base), 5000, horizon=30.0, seed=4)
    t = sample(base, 5000, seed=4)
    assert np.array_equal(data.time, np.minimum(t, 30.0))
    assert np.array_equal(data.event, t <= 30.0)


def test_cured_fraction():
    data = sample_cure(LongTermModel(0.25, new_model(1, [], [3])), 100_000, horizon=1e12, seed=5)
    # susceptible units essentially all fail before such a horizon
    assert abs(1 - data.event.mean() - 0.25) < 0.005


def test_censoring_limits():
    t = sample(REFERENCE_MODEL, 10_000, seed=6)
    assert apply_censoring(t, 1e15, seed=1).event.mean() > 0.999
    assert apply_censoring(t, math.inf, seed=1).event.all()
    below = apply_censoring(t, 0.4, seed=1)
    assert not below.event.any()
    assert below.time.max() <= 0.4
    with pytest.raises(ParameterError):
        apply_censoring(t, 0.0)


def test_censoring_rule():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    data = apply_censoring(t, 5.0, seed=9)
    y = 5.0 * (1 - np.random.default_rng(9).random(4))
    assert np.array_equal(data.event, t <= y)
    assert np.array_equal(data.time, np.minimum(t, y))


def _quad_expected_min(x_min, breaks, alphas, c):
    pts = [p for p in [0.0, x_min] + list(breaks) if p < c] + [c]
    return sum(
        integrate.quad(lambda x: 1.0 if x < x_min else ref_survival(x, x_min, breaks, alphas), lo, hi,
                       epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        for lo, hi in zip(pts, pts[1:])
    )


def test_expected_min_against_quadrature():
    rng = np.random.default_rng(10)
    for _ in range(40):
        x_min, breaks, alphas = random_model(rng)
        c = float(x_min * rng.uniform(0.5, 200))
        got = expected_min(new_model(x_min, breaks, alphas), c)
        assert got == pytest.approx(_quad_expected_min(x_min, breaks, alphas, c), rel=1e-9)


def test_calibration_round_trip():
    m = new_model(1, [], [3])
    target = censoring_probability(m, 2.0)
    assert target == pytest.approx(_quad_expected_min(1, [], [3], 2.0) / 2.0, rel=1e-12)
    assert calibrate_ymax(m, target) == pytest.approx(2.0, abs=1e-3)


def test_calibration_small_target():
    m = new_model(1, [], [3])
    assert calibrate_ymax(m, 1e-3) > m.quantile(1 - 1e-6)


def test_calibration_errors():
    with pytest.raises(CalibrationError):
        calibrate_ymax(REFERENCE_MODEL, 0.0)
    with pytest.raises(CalibrationError):
        calibrate_ymax(REFERENCE_MODEL, 1.0)
    # a cured share of 0.6 cannot yield only 30% censoring
    with pytest.raises(CalibrationError):
        calibrate_ymax(LongTermModel(0.6, REFERENCE_MODEL), 0.3)


def test_reference_config_censoring_rate():
    y_max = calibrate_ymax(REFERENCE_MODEL, 0.37)
    assert abs(censoring_probability(REFERENCE_MODEL, y_max) - 0.37) < 1e-4
    data = apply_censoring(sample(REFERENCE_MODEL, 100_000, seed=11), y_max, seed=12)
    assert abs(1 - data.event.mean() - 0.37) < 0.01


def test_replication_seeds_are_independent_of_order():
    a = np.random.default_rng(replication_seed(7, 2, 15)).random(3)
    b = np.random.default_rng(replication_seed(7, 2, 15)).random(3)
    c = np.random.default_rng(replication_seed(7, 2, 16)).random(3)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def _truth_estimator(data, config):
    t = config.truth
    return t, np.column_stack([t, t])


SMALL = MCConfig(0.5, (13.0,), (1.3, 6.0), sample_sizes=(60, 300), replications=150, seed=3)


def test_truth_hook():
    rep = mc_study(SMALL, estimator=_truth_estimator, workers=1)
    for c in rep.cells:
        assert (c.bias, c.rmse, c.coverage, c.dropped) == (0.0, 0.0, 1.0, 0)


def test_report_invariants():
    rep = mc_study(SMALL, workers=1)
    assert len(rep.cells) == 4
    for c in rep.cells:
        assert c.rmse >= abs(c.bias)
        assert 0.0 <= c.coverage <= 1.0
        assert c.dropped + c.replications_used == SMALL.replications
    csv_lines = rep.to_csv().splitlines()
    assert csv_lines[0] == "parameter,n,bias,rmse,coverage,dropped"
    assert len(csv_lines) == 5


def test_determinism_across_workers():
    assert mc_study(SMALL, workers=1) == mc_study(SMALL, workers=2)


def test_cure_study_runs():
    cfg = MCConfig(0.5, (13.0,), (1.4, 6.0), pi=0.25, sample_sizes=(400,), replications=20,
                   censoring=0.35, seed=1)
    rep = mc_study(cfg, workers=1)
    assert [c.parameter for c in rep.cells] == ["alpha_1", "alpha_2", "pi"]
    assert abs(rep.cell("pi", 400).bias) < 0.05


def test_config_validation_and_json(tmp_path):
    with pytest.raises(ParameterError):
        MCConfig(0.5, (13.0,), (1.3, 6.0), replications=0)
    with pytest.raises(ParameterError):
        MCConfig(0.5, (13.0,), (1.3, 6.0), sample_sizes=(1,))
    with pytest.raises(ParameterError):
        MCConfig.from_dict({"x_min": 0.5, "breaks": [], "alphas": [2], "bogus": 1})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL.to_dict()))
    assert MCConfig.from_json(path) == SMALL
