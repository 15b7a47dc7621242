import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridplan.catalog import RenewableParams
from gridplan.scenario.power import pv_coefficient, wind_coefficient

PV = RenewableParams("pv", eta=0.2, kappa=0.004, t_ref=25.0)
WIND = RenewableParams("wind", v_cut_in=2.5, v_rated=11.0, v_cut_out=25.0)


def test_pv_at_reference_temperature():
    assert pv_coefficient(PV, 1.0, 25.0) == 0.2


def test_pv_dark():
    assert pv_coefficient(PV, 0.0, 40.0) == 0.0


def test_pv_temperature_derating():
    assert pv_coefficient(PV, 1.0, 50.0) == pytest.approx(0.18, rel=1e-14)


def test_pv_floor_at_zero():
    assert pv_coefficient(PV, 1.0, 400.0) == 0.0


def test_pv_rejects_negative_irradiance():
    with pytest.raises(ValueError):
        pv_coefficient(PV, -0.1, 25.0)


def test_wind_below_cut_in():
    assert wind_coefficient(WIND, 2.0) == 0.0


def test_wind_at_rated():
    assert wind_coefficient(WIND, 11.0) == 1.0


def test_wind_ramp_midpoint():
    assert wind_coefficient(WIND, 6.75) == pytest.approx(0.5, abs=1e-15)


def test_wind_above_cut_out():
    assert wind_coefficient(WIND, 26.0) == 0.0
    assert wind_coefficient(WIND, 25.0) == 1.0


def test_vectorized():
    v = np.array([0.0, 2.5, 6.75, 11.0, 20.0, 30.0])
    np.testing.assert_allclose(wind_coefficient(WIND, v), [0, 0, 0.5, 1, 1, 0])


@given(st.floats(0, 40))
def test_wind_in_unit_interval(v):
    c = wind_coefficient(WIND, v)
    assert 0.0 <= c <= 1.0
    if v < WIND.v_cut_in or v > WIND.v_cut_out:
        assert c == 0.0


@given(st.floats(0, 1), st.floats(-30, 60))
def test_pv_bounded_by_eta(phi, t):
    c = pv_coefficient(PV, phi, t)
    assert 0.0 <= c <= PV.eta * phi * (1 + PV.kappa * 55) + 1e-15


@given(st.floats(3.0, 10.9), st.floats(3.0, 10.9))
def test_wind_monotone_on_ramp(a, b):
    lo, hi = sorted((a, b))
    assert wind_coefficient(WIND, lo) <= wind_coefficient(WIND, hi)
