import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ndtri

from gridplan.scenario.fitting import FittedModel, propagate_uncertainty
from gridplan.scenario.models import weibull_cdf
from gridplan.scenario.sampling import BANDS, band_masses, band_of, band_z, sample_band, sample_wind
from gridplan.scenario.scenario_set import ScenarioError

BAND_MASS = {"likely": 0.682, "mid_likely": 0.272, "unlikely": 0.042}


def _model(mse=4.0):
    return FittedModel("daily_temperature", np.array([10.0, 0.0, 15.0]), np.diag([0.01, 0.0, 0.04]), mse, 100)


def test_unrestricted_band_masses():
    z = np.random.default_rng(0).standard_normal(100_000)
    m = band_masses(z)
    for name, target in BAND_MASS.items():
        assert abs(m[name] - target) <= 0.01


@pytest.mark.parametrize("lk", list(BANDS))
def test_band_draws_stay_in_band(lk):
    z = band_z(lk, np.random.default_rng(1), 100_000)
    a, b = BANDS[lk]
    assert np.all((np.abs(z) >= a) & (np.abs(z) < b))


def test_symmetric_sign():
    z = band_z("likely", np.random.default_rng(2), 100_000)
    assert abs(np.mean(z > 0) - 0.5) < 0.01


def test_alias_mid():
    assert np.all(band_of(band_z("mid", np.random.default_rng(3), 1000)) == 1)


def test_unknown_likelihood():
    with pytest.raises(ScenarioError):
        band_z("certain", np.random.default_rng(0))


@pytest.mark.parametrize("lk", ["likely", "mid_likely", "unlikely"])
def test_zero_variance_returns_mean(lk):
    m = FittedModel.exact("daily_temperature", (10, 0, 15))
    assert sample_band(m, {"t": 91.25}, lk, np.random.default_rng(4)) == pytest.approx(25.0)


def test_determinism():
    m = _model()
    a = [sample_band(m, {"t": 10.0}, "likely", np.random.default_rng(7)) for _ in range(3)]
    r1, r2 = np.random.default_rng(8), np.random.default_rng(8)
    s1 = [sample_band(m, {"t": float(t)}, "unlikely", r1) for t in range(50)]
    s2 = [sample_band(m, {"t": float(t)}, "unlikely", r2) for t in range(50)]
    assert a[0] == a[1] == a[2]
    assert s1 == s2


@given(st.integers(0, 2**32 - 1), st.floats(0, 730), st.sampled_from(list(BANDS)))
def test_band_membership(seed, t, lk):
    m = _model()
    x = {"t": t}
    mean = float(m.predict(x))
    B = math.sqrt(propagate_uncertainty(m, x) + m.mse)
    v = sample_band(m, x, lk, np.random.default_rng(seed), clamp=False)
    a, b = BANDS[lk]
    assert a * B - 1e-9 <= abs(v - mean) <= b * B + 1e-9


def test_clamp_is_counted():
    # mean 0.5, B = 2: unlikely draws below the mean are negative and get clamped
    m = FittedModel("population", np.array([0.5, 0.0, 0.0]), np.zeros((3, 3)), 4.0, 100)
    counter: dict[str, int] = {}
    vals = [sample_band(m, {"t": 0.0}, "unlikely", np.random.default_rng(i), counter=counter) for i in range(400)]
    below = sum(v == 0.0 for v in vals)
    assert below > 100
    assert counter["population"] == below
    assert all(v >= 0 for v in vals)


def test_unlikely_outside_two_widths_unless_clamped():
    m = FittedModel("population", np.array([3.0, 0.0, 0.0]), np.zeros((3, 3)), 1.0, 100)
    counter: dict[str, int] = {}
    vals = np.array([sample_band(m, {"t": 0.0}, "unlikely", np.random.default_rng(i), counter=counter)
                     for i in range(500)])
    inside = np.abs(vals - 3.0) < 2.0
    assert inside.sum() == counter.get("population", 0)
    assert np.all(vals[inside] == 0.0)


def test_wind_sampler_respects_band():
    m = FittedModel.exact("weibull_wind", (2.0, 7.0))
    v = np.array([sample_wind(m, "likely", np.random.default_rng(i)) for i in range(2000)])
    z = ndtri(weibull_cdf(2.0, 7.0, v))
    assert np.all(np.abs(z) < 1.0 + 1e-9)
    assert np.all(v > 0)


def test_wind_median_from_symmetric_band():
    m = FittedModel.exact("weibull_wind", (2.0, 7.0))
    v = np.array([sample_wind(m, "likely", np.random.default_rng(i)) for i in range(4000)])
    median = 7.0 * math.log(2.0) ** 0.5
    assert abs(np.median(v) - median) < 0.1
