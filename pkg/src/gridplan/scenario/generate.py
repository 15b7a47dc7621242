"""Scenario generation: chained model evaluation with banded perturbations.

Every random quantity draws from its own substream,
``SeedSequence(seed, spawn_key=(k, d, t, code))``, so a scenario does not depend on
evaluation order. Daily quantities use ``t = 0``; the code keeps them apart.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..catalog import Catalog
from .history import ALL_KINDS, ModelSet
from .power import pv_coefficient, wind_coefficient
from .sampling import sample_band, sample_wind
from .scenario_set import GridSpec, ScenarioError, ScenarioSet, normalize_likelihood

DAYS_PER_YEAR = 365
MONTH_START = np.cumsum([0, 31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31])

# substream codes
T_DAILY, POPULATION, E_DAILY, T_AIR, IRRADIANCE, WIND, E_HOURLY = range(7)

# Time-of-use electricity tariff and flat fuel prices, per unit of each resource.
DEFAULT_BUY = {
    "elect": tuple([1.8] * 6 + [2.6] * 11 + [4.0] * 5 + [1.8] * 2),
    "gas": 0.9, "oil": 0.55, "biomass": 0.15, "wood": 0.12, "coal": 0.1,
}


def month_of(day_of_year: float) -> int:
    d = (int(day_of_year) - 1) % DAYS_PER_YEAR
    return int(np.searchsorted(MONTH_START, d, side="right"))


def _price_series(spec, hours: np.ndarray) -> np.ndarray:
    """A scalar, or 24 hourly values looked up at each interval's hour."""
    a = np.asarray(spec, dtype=float)
    if a.ndim == 0:
        return np.full(hours.shape, float(a))
    if a.shape != (24,):
        raise ScenarioError("a price profile needs one value or 24 hourly values")
    return a[np.minimum(hours.astype(int), 23)]


@dataclass(frozen=True)
class ScenarioOptions:
    """Scenario knobs that the fitted models do not cover."""

    demand_resource: str = "elect"
    demand_ratios: Mapping[str, float] = field(default_factory=dict)  # other demands as a multiple of it
    irradiance_ref: float = 1.0  # irradiance giving phi = 1
    price_buy: Mapping[str, object] = field(default_factory=lambda: dict(DEFAULT_BUY))
    price_sell: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.irradiance_ref > 0:
            raise ScenarioError("irradiance_ref must be positive")
        if any(v < 0 for v in self.demand_ratios.values()):
            raise ScenarioError("demand ratios must be nonnegative")


def _rng(seed: int, k: int, d: int, t: int, code: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k, d, t, code)))


def day_time(grid: GridSpec, k: int, d: int) -> float:
    """Days since Jan 1 of the history's first year, at the day's midpoint."""
    return (grid.start_year + k) * DAYS_PER_YEAR + (grid.day_of_year[d] - 1) + 0.5


def generate_scenario(models: ModelSet, grid: GridSpec, likelihood: str, seed: int,
                      catalog: Optional[Catalog] = None,
                      options: Optional[ScenarioOptions] = None) -> ScenarioSet:
    opts = options or ScenarioOptions()
    lk = normalize_likelihood(likelihood)
    missing = models.missing()
    if missing:
        raise ScenarioError(f"no fitted model for {', '.join(missing)}")
    K, D, T = grid.shape
    hours = grid.hour_of_day()
    temp = np.zeros(grid.shape)
    irr = np.zeros(grid.shape)
    wind = np.zeros(grid.shape)
    dem = np.zeros(grid.shape)
    clamps: dict[str, int] = {}
    m = models.models
    for k in range(K):
        for d in range(D):
            t_day = day_time(grid, k, d)
            t_daily = sample_band(m["daily_temperature"], {"t": t_day}, lk, _rng(seed, k, d, 0, T_DAILY),
                                  counter=clamps)
            pop = sample_band(m["population"], {"t": t_day}, lk, _rng(seed, k, d, 0, POPULATION),
                              counter=clamps)
            e_daily = sample_band(m["daily_demand"], {"t": t_day, "P_t": pop}, lk,
                                  _rng(seed, k, d, 0, E_DAILY), counter=clamps)
            month = month_of(grid.day_of_year[d])
            for t in range(T):
                th = float(hours[t])
                temp[k, d, t] = sample_band(m["hourly_temperature"], {"t_h": th, "T_daily": t_daily}, lk,
                                            _rng(seed, k, d, t, T_AIR), counter=clamps)
                irr[k, d, t] = sample_band(m["solar_irradiance"], {"t": t_day, "t_h": th, "T_daily": t_daily},
                                           lk, _rng(seed, k, d, t, IRRADIANCE), counter=clamps)
                wind[k, d, t] = sample_wind(models.wind_model(month, th), lk, _rng(seed, k, d, t, WIND))
                dem[k, d, t] = sample_band(m["hourly_demand"], {"t_h": th, "E_daily": e_daily}, lk,
                                           _rng(seed, k, d, t, E_HOURLY), counter=clamps)

    demand = {opts.demand_resource: dem}
    for r, ratio in opts.demand_ratios.items():
        demand[r] = ratio * dem
    price_buy = {r: np.broadcast_to(_price_series(v, hours), grid.shape).copy()
                 for r, v in opts.price_buy.items()}
    price_sell = {r: np.broadcast_to(_price_series(v, hours), grid.shape).copy()
                  for r, v in opts.price_sell.items()}
    pbar = renewable_coefficients(catalog, temp, irr, wind, opts.irradiance_ref, clamps) if catalog else {}
    return ScenarioSet.build(grid.shape, grid.dt, demand=demand, temperature=temp, irradiance=irr,
                             wind=wind, price_buy=price_buy, price_sell=price_sell, pbar=pbar,
                             likelihood=lk, seed=seed, clamps=clamps)


def renewable_coefficients(catalog: Catalog, temp: np.ndarray, irr: np.ndarray, wind: np.ndarray,
                           irradiance_ref: float = 1.0,
                           clamps: Optional[dict[str, int]] = None) -> dict[str, np.ndarray]:
    out = {}
    for e in catalog.equipment:
        if not e.is_renewable:
            continue
        rp = catalog.renewable_params[e.id]
        if rp.kind == "pv":
            raw = np.asarray(pv_coefficient(rp, irr / irradiance_ref, temp))
            over = int((raw > 1.0).sum())
            if over and clamps is not None:
                clamps["pbar"] = clamps.get("pbar", 0) + over
            out[e.id] = np.minimum(raw, 1.0)
        else:
            out[e.id] = np.asarray(wind_coefficient(rp, wind), dtype=float)
    return out


def check_model_set(models: ModelSet, kinds: Sequence[str] = ALL_KINDS) -> None:
    missing = [k for k in kinds if k not in models.models]
    if missing:
        raise ScenarioError(f"no fitted model for {', '.join(missing)}")
