import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridplan.scenario.models import (
    KINDS, OMEGA, ModelInputError, eval_model, fd_step, get_kind, param_jacobian, weibull_cdf,
    weibull_quantile,
)

finite = st.floats(-50, 50, allow_nan=False)


def test_daily_temperature_quarter_period():
    assert eval_model("daily_temperature", (10, 0, 15), {"t": 91.25}) == pytest.approx(25.0, abs=1e-12)


def test_daily_temperature_at_origin():
    assert eval_model("daily_temperature", (10, 0, 15), {"t": 0.0}) == pytest.approx(15.0, abs=1e-12)


def test_solar_peak_value():
    mu, sigma, td = 12.5, 2.6, 14.0
    # seasonal terms with zero amplitude give constant mu and sigma
    p = (0.0, 0.0, mu, 0.0, 0.0, sigma)
    v = eval_model("solar_irradiance", p, {"t": 40.0, "t_h": mu, "T_daily": td})
    assert v == pytest.approx(td / (sigma * math.sqrt(2 * math.pi)), rel=1e-14)


def test_hourly_demand_substitution():
    assert eval_model("hourly_demand", (0, 0, 0, 1), {"t_h": 2.0, "E_daily": 50.0}) == pytest.approx(100.0)


def test_hourly_demand_is_zero_at_midnight():
    assert eval_model("hourly_demand", (1e-5, 2e-4, 3e-3, 0.04), {"t_h": 0.0, "E_daily": 1e5}) == 0.0


def test_population_quadratic():
    assert eval_model("population", (100.0, 2.0, 0.5), {"t": 4.0}) == pytest.approx(100 + 8 + 8)


def test_daily_demand_adds_population_term():
    v = eval_model("daily_demand", (0.0, 0.0, 10.0, 2.0), {"t": 3.0, "P_t": 7.0})
    assert v == pytest.approx(24.0)


def test_hourly_temperature_polynomial():
    p = (1.0, 0.0, 0.0, 0.0, 1.0)
    assert eval_model("hourly_temperature", p, {"t_h": 2.0, "T_daily": 3.0}) == pytest.approx(17.0 * 3.0)


def test_arrays_broadcast():
    t = np.array([0.0, 91.25, 182.5])
    v = eval_model("daily_temperature", (10, 0, 15), {"t": t})
    np.testing.assert_allclose(v, [15.0, 25.0, 15.0], atol=1e-12)


def test_missing_input_is_named():
    with pytest.raises(ModelInputError, match="T_daily"):
        eval_model("hourly_temperature", (0, 0, 0, 0, 1), {"t_h": 1.0})


def test_arity_mismatch():
    with pytest.raises(ModelInputError, match="3 parameters"):
        eval_model("daily_temperature", (1, 2), {"t": 0.0})


def test_unknown_kind():
    with pytest.raises(ModelInputError):
        get_kind("tide_height")


def test_declared_arities():
    expected = {"daily_temperature": 3, "hourly_temperature": 5, "solar_irradiance": 6, "weibull_wind": 2,
                "population": 3, "daily_demand": 4, "hourly_demand": 4}
    assert {k: v.arity for k, v in KINDS.items()} == expected


def test_omega_is_yearly_in_radians():
    assert OMEGA * 365.0 == pytest.approx(2 * math.pi)


def test_fd_step_scales_with_parameter():
    np.testing.assert_allclose(fd_step(np.array([0.5, -3.0, 1e4])), [1e-6, 3e-6, 1e-2])


@given(st.floats(0.1, 50), st.floats(0, 365), st.floats(-40, 40), st.floats(0, 730))
def test_jacobian_matches_analytic_daily_temperature(p1, p2, p3, t):
    J = param_jacobian("daily_temperature", (p1, p2, p3), {"t": t})
    s = math.sin(OMEGA * (t + p2))
    c = math.cos(OMEGA * (t + p2))
    np.testing.assert_allclose(J[0], [s, p1 * OMEGA * c, 1.0], atol=1e-6 * max(1.0, p1))


@given(st.floats(0.3, 8.0), st.floats(0.5, 20.0))
def test_weibull_cdf_at_scale(shape, scale):
    assert weibull_cdf(shape, scale, scale) == pytest.approx(1 - math.exp(-1), rel=1e-12)


@given(st.floats(0.3, 8.0), st.floats(0.5, 20.0), st.floats(1e-6, 1 - 1e-6))
def test_weibull_quantile_inverts_cdf(shape, scale, u):
    v = weibull_quantile(shape, scale, u)
    assert weibull_cdf(shape, scale, v) == pytest.approx(u, rel=1e-9, abs=1e-12)
