import math

import numpy as np
import pytest
from scipy import integrate

from powersurv import DomainError, MixtureWeibull, ParameterError, WeibullComponent, saleh_model


def _direct_survival(x):
    return 0.876 * math.exp(-((x / 12.835) ** 0.618)) + 0.124 * math.exp(-((x / 14.833) ** 13.387))


def _direct_pdf(x):
    out = 0.0
    for w, lam, beta in ((0.876, 12.835, 0.618), (0.124, 14.833, 13.387)):
        out += w * beta / lam * (x / lam) ** (beta - 1) * math.exp(-((x / lam) ** beta))
    return out


def test_published_constants():
    m = saleh_model()
    assert m.components[0] == (0.876, 12.835, 0.618)
    assert m.components[1] == (0.124, 14.833, 13.387)
    assert m.components[0].weight == 0.876


def test_survival_at_zero():
    assert saleh_model().survival(0.0) == 1.0
    assert MixtureWeibull(((0.3, 2.0, 0.5), (0.7, 1.0, 3.0))).survival(0.0) == 1.0


def test_exponential_case():
    m = MixtureWeibull((WeibullComponent(1.0, 1.0, 1.0),))
    assert m.survival(1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert m.pdf(0.0) == 1.0


def test_value_at_first_scale():
    got = saleh_model().survival(12.835)
    assert got == pytest.approx(_direct_survival(12.835), abs=1e-12)
    assert got == pytest.approx(0.876 * math.exp(-1) + 0.124 * math.exp(-((12.835 / 14.833) ** 13.387)), abs=1e-12)


def test_pdf_against_direct():
    x = np.linspace(0.1, 60, 200)
    np.testing.assert_allclose(saleh_model().pdf(x), [_direct_pdf(v) for v in x], rtol=1e-12)


def test_density_integrates_to_one():
    # the shape-0.618 component has an integrable singularity at zero
    total = 0.0
    for lo, hi in ((0.0, 1.0), (1.0, 14.833), (14.833, 30.0), (30.0, math.inf)):
        val, _ = integrate.quad(_direct_pdf if lo > 0 else lambda x: _direct_pdf(max(x, 1e-300)), lo, hi,
                                epsabs=1e-13, epsrel=1e-12, limit=500)
        total += val
    assert total == pytest.approx(1.0, abs=1e-8)
    # same integral with the package density
    m = saleh_model()
    pkg = sum(
        integrate.quad(lambda x: float(m.pdf(x)), lo, hi, epsabs=1e-13, epsrel=1e-12, limit=500)[0]
        for lo, hi in ((1e-300, 1.0), (1.0, 14.833), (14.833, 30.0), (30.0, math.inf))
    )
    assert pkg == pytest.approx(1.0, abs=1e-8)


def test_pdf_is_negative_derivative():
    m = saleh_model()
    h = 1e-5
    x = np.linspace(0.5, 50, 300)
    fd = -(m.survival(x + h) - m.survival(x - h)) / (2 * h)
    np.testing.assert_allclose(m.pdf(x), fd, atol=1e-6)


def test_everyone_dies():
    m = saleh_model()
    # the heavy first component still leaves about 0.0037 at 200 years
    assert m.survival(200.0) == pytest.approx(_direct_survival(200.0), rel=1e-12)
    assert m.survival(2000.0) < 1e-6
    assert np.all(np.diff(m.survival(np.geomspace(1, 1e4, 200))) < 0)


def test_monotone_to_fifty_years():
    s = saleh_model().survival(np.linspace(0, 50, 5001))
    assert np.all(np.diff(s) <= 0)


def test_hazard_matches_ratio_and_stays_finite():
    m = saleh_model()
    x = np.linspace(0.5, 40, 100)
    np.testing.assert_allclose(m.hazard(x), m.pdf(x) / m.survival(x), rtol=1e-12)
    assert np.all(np.isfinite(m.hazard(np.array([100.0, 500.0, 2000.0]))))


def test_validation():
    with pytest.raises(ParameterError):
        MixtureWeibull(((0.5, 1.0, 1.0), (0.4, 1.0, 1.0)))
    with pytest.raises(ParameterError):
        MixtureWeibull(((1.0, -1.0, 1.0),))
    with pytest.raises(DomainError):
        saleh_model().survival(-1.0)


def test_json_round_trip():
    m = saleh_model()
    assert MixtureWeibull.from_dict(m.to_dict()) == m
