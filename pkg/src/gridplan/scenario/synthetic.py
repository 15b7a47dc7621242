"""Synthetic hourly history drawn from known model parameters."""
from __future__ import annotations

from datetime import datetime, timedelta
from typing import Mapping, Optional

import numpy as np

from .history import History, _make_history, write_history
from .models import eval_model, weibull_quantile

TRUE_PARAMS: dict[str, tuple[float, ...]] = {
    "daily_temperature": (9.0, 255.0, 15.0),
    "hourly_temperature": (0.0, -2e-4, 4e-3, 0.02, 0.75),  # rescaled below
    "solar_irradiance": (0.5, 255.0, 12.5, 0.6, 255.0, 2.6),
    "weibull_wind": (2.1, 6.5),
    "population": (27000.0, 1.0, 1e-4),
    "daily_demand": (6000.0, 345.0, 40000.0, 1.2),
    "hourly_demand": (-1.1e-6, 3.6e-5, -2.0e-4, 3.2e-3),  # rescaled below
}


def _normalized(kind: str, params, target: float) -> tuple[float, ...]:
    """Scale a daily profile so its hourly values sum to ``target``."""
    inputs = {"t_h": np.arange(24.0), "T_daily": 1.0, "E_daily": 1.0}
    total = float(np.sum(eval_model(kind, params, inputs)))
    return tuple(float(v) * target / total for v in params)


# The hourly temperature profile averages to 1 over the day, so T_daily is the daily
# mean; the hourly demand profile sums to 1, so E_daily is the daily energy.
TRUE_PARAMS["hourly_temperature"] = _normalized("hourly_temperature", TRUE_PARAMS["hourly_temperature"], 24.0)
TRUE_PARAMS["hourly_demand"] = _normalized("hourly_demand", TRUE_PARAMS["hourly_demand"], 1.0)


def synthetic_history(days: int = 730, start: datetime = datetime(2020, 1, 1), seed: int = 0,
                      noise: Optional[Mapping[str, float]] = None,
                      params: Optional[Mapping[str, tuple[float, ...]]] = None,
                      population_every: int = 30) -> History:
    """Hourly records over ``days`` days. ``noise`` gives Gaussian noise std per column.

    Population is observed every ``population_every`` days; other hours leave it blank.
    """
    p = dict(TRUE_PARAMS)
    p.update(params or {})
    sd = {"temperature_c": 0.0, "irradiance": 0.0, "demand_kwh": 0.0, "population": 0.0}
    sd.update(noise or {})
    rng = np.random.default_rng(seed)
    n = days * 24
    stamps = [start + timedelta(hours=i) for i in range(n)]
    epoch = datetime(start.year, 1, 1)
    t = np.array([(s - epoch).total_seconds() / 86400.0 for s in stamps])
    day_t = np.floor(t) + 0.5
    th = np.tile(np.arange(24.0), days)

    t_daily = eval_model("daily_temperature", p["daily_temperature"], {"t": day_t})
    temp = eval_model("hourly_temperature", p["hourly_temperature"], {"t_h": th, "T_daily": t_daily})
    irr = eval_model("solar_irradiance", p["solar_irradiance"], {"t": day_t, "t_h": th, "T_daily": t_daily})
    wind = weibull_quantile(*p["weibull_wind"], rng.random(n))
    pop = eval_model("population", p["population"], {"t": t})
    pop_day = eval_model("population", p["population"], {"t": day_t})
    e_daily = eval_model("daily_demand", p["daily_demand"], {"t": day_t, "P_t": pop_day})
    dem = eval_model("hourly_demand", p["hourly_demand"], {"t_h": th, "E_daily": e_daily})

    cols = {"temperature_c": temp, "irradiance": irr, "wind_ms": wind, "demand_kwh": dem, "population": pop}
    for c, s in sd.items():
        if s > 0:
            cols[c] = cols[c] + rng.normal(0.0, s, n)
    cols["population"] = np.where(np.arange(n) % (24 * population_every) == 0, cols["population"], np.nan)
    names = list(cols)
    return _make_history(stamps, np.column_stack([cols[c] for c in names]), names)


def write_synthetic_history(path, days: int = 730, seed: int = 0,
                            noise: Optional[Mapping[str, float]] = None) -> History:
    h = synthetic_history(days=days, seed=seed, noise=noise)
    epoch = datetime(h.epoch_year, 1, 1)
    # round to the second so the timestamps survive the text round trip
    stamps = [epoch + timedelta(seconds=round(t * 86400.0)) for t in h.t]
    write_history(path, stamps, h.columns)
    return h
