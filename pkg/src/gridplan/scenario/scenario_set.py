"""Scenario grid and the per-grid-point data the planning model consumes."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

LIKELIHOODS = ("likely", "mid_likely", "unlikely")
LIKELIHOOD_ALIASES = {"likely": "likely", "mid": "mid_likely", "mid_likely": "mid_likely",
                      "unlikely": "unlikely"}


class ScenarioError(ValueError):
    pass


def normalize_likelihood(token: str) -> str:
    try:
        return LIKELIHOOD_ALIASES[token]
    except KeyError:
        raise ScenarioError(f"unknown likelihood {token!r}; expected likely, mid or unlikely") from None


@dataclass(frozen=True)
class GridSpec:
    """Years x representative days x intervals, with interval length ``dt`` hours.

    ``day_of_year`` gives the calendar day (1..365) each representative day stands for;
    ``start_year`` offsets the population trend.
    """

    years: int = 1
    day_of_year: tuple[float, ...] = (172.0,)
    intervals: int = 48
    dt: float = 0.5
    start_year: int = 0

    def __post_init__(self):
        if self.years <= 0 or self.intervals <= 0 or not self.day_of_year:
            raise ScenarioError("grid needs at least one year, day and interval")
        if self.dt <= 0:
            raise ScenarioError("interval length must be positive")

    @property
    def n_days(self) -> int:
        return len(self.day_of_year)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.years, self.n_days, self.intervals

    def hour_of_day(self) -> np.ndarray:
        """Interval midpoints in hours."""
        return (np.arange(self.intervals) + 0.5) * self.dt


def _arr(x, shape) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = np.full(shape, float(a))
    if a.shape != shape:
        raise ScenarioError(f"series has shape {a.shape}, grid is {shape}")
    return a


@dataclass(frozen=True)
class ScenarioSet:
    """Arrays are indexed ``[year, day, interval]`` (all zero-based)."""

    likelihood: str
    dt: float
    shape: tuple[int, int, int]
    demand: Mapping[str, np.ndarray]
    temperature: np.ndarray
    irradiance: np.ndarray
    wind: np.ndarray
    price_buy: Mapping[str, np.ndarray] = field(default_factory=dict)
    price_sell: Mapping[str, np.ndarray] = field(default_factory=dict)
    pbar: Mapping[str, np.ndarray] = field(default_factory=dict)
    seed: Optional[int] = None
    clamps: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def build(cls, shape, dt, *, demand=None, temperature=25.0, irradiance=0.0, wind=0.0,
              price_buy=None, price_sell=None, pbar=None, likelihood="likely", seed=None,
              clamps=None) -> "ScenarioSet":
        shape = tuple(int(s) for s in shape)
        conv = lambda d: {k: _arr(v, shape) for k, v in (d or {}).items()}
        s = cls(normalize_likelihood(likelihood), float(dt), shape, conv(demand),
                _arr(temperature, shape), _arr(irradiance, shape), _arr(wind, shape),
                conv(price_buy), conv(price_sell), conv(pbar), seed, dict(clamps or {}))
        s.check()
        return s

    @property
    def years(self) -> int:
        return self.shape[0]

    @property
    def n_days(self) -> int:
        return self.shape[1]

    @property
    def intervals(self) -> int:
        return self.shape[2]

    def d(self, resource: str) -> np.ndarray:
        return self.demand.get(resource, np.zeros(self.shape))

    def buy(self, resource: str) -> np.ndarray:
        return self.price_buy.get(resource, np.zeros(self.shape))

    def sell(self, resource: str) -> np.ndarray:
        return self.price_sell.get(resource, np.zeros(self.shape))

    def check(self) -> None:
        for name, series in self.demand.items():
            if np.any(series < 0) or not np.all(np.isfinite(series)):
                raise ScenarioError(f"demand for {name} must be finite and nonnegative")
        if np.any(self.irradiance < 0) or np.any(self.wind < 0):
            raise ScenarioError("irradiance and wind speed must be nonnegative")
        for uid, series in self.pbar.items():
            if np.any(series < 0) or np.any(series > 1):
                raise ScenarioError(f"operating coefficient of {uid} outside [0,1]")

    def with_demand(self, resource: str, series) -> "ScenarioSet":
        demand = dict(self.demand)
        demand[resource] = _arr(series, self.shape)
        return ScenarioSet(self.likelihood, self.dt, self.shape, demand, self.temperature,
                           self.irradiance, self.wind, self.price_buy, self.price_sell,
                           self.pbar, self.seed, self.clamps)

    # -- csv ------------------------------------------------------------
    def columns(self) -> list[str]:
        cols = ["year", "day", "interval"]
        cols += [f"demand_{r}" for r in sorted(self.demand)]
        cols += ["temperature_c", "wind_ms", "irradiance"]
        for r in sorted(set(self.price_buy) | set(self.price_sell)):
            cols += [f"price_buy_{r}", f"price_sell_{r}"]
        cols += [f"pbar_{u}" for u in sorted(self.pbar)]
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# likelihood={self.likelihood} dt={self.dt!r} seed={self.seed}\n")
        cols = self.columns()
        w.writerow(cols)
        K, D, T = self.shape
        for k in range(K):
            for d in range(D):
                for t in range(T):
                    row: list[str] = [str(k + 1), str(d + 1), str(t + 1)]
                    for c in cols[3:]:
                        row.append(repr(float(self._series(c)[k, d, t])))
                    w.writerow(row)
        return buf.getvalue()

    def _series(self, col: str) -> np.ndarray:
        fixed = {"temperature_c": self.temperature, "wind_ms": self.wind, "irradiance": self.irradiance}
        if col in fixed:
            return fixed[col]
        for prefix, table in (("demand_", self.demand), ("price_buy_", self.price_buy),
                              ("price_sell_", self.price_sell), ("pbar_", self.pbar)):
            if col.startswith(prefix):
                return table.get(col[len(prefix):], np.zeros(self.shape))
        raise KeyError(col)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def read_scenario(path: str | Path) -> ScenarioSet:
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text, str(path))


def parse_scenario(text: str, origin: str = "<scenario>") -> ScenarioSet:
    lines = text.splitlines()
    meta = {"likelihood": "likely", "dt": None, "seed": None}
    if lines and lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                meta[k] = v
        lines = lines[1:]
    rows = list(csv.reader(lines))
    if not rows:
        raise ScenarioError(f"{origin}: empty scenario file")
    header, body = rows[0], rows[1:]
    for need in ("year", "day", "interval"):
        if need not in header:
            raise ScenarioError(f"{origin}: missing column {need!r}")
    try:
        idx = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in body], dtype=int)
        vals = np.array([[float(x) for x in r[3:]] for r in body], dtype=float).reshape(len(body), len(header) - 3)
    except (ValueError, IndexError) as e:
        raise ScenarioError(f"{origin}: malformed row ({e})") from None
    if idx.size == 0:
        raise ScenarioError(f"{origin}: no grid points")
    K, D, T = (int(idx[:, j].max()) for j in range(3))
    if idx.min() < 1 or len(body) != K * D * T or len({tuple(r) for r in idx}) != len(body):
        raise ScenarioError(f"{origin}: grid points missing or duplicated")
    arrays: dict[str, np.ndarray] = {}
    for j, col in enumerate(header[3:]):
        a = np.zeros((K, D, T))
        a[idx[:, 0] - 1, idx[:, 1] - 1, idx[:, 2] - 1] = vals[:, j]
        arrays[col] = a
    pick = lambda p: {c[len(p):]: a for c, a in arrays.items() if c.startswith(p)}
    dt = float(meta["dt"]) if meta["dt"] not in (None, "None") else 24.0 / T
    seed = None if meta["seed"] in (None, "None") else int(meta["seed"])
    zeros = np.zeros((K, D, T))
    return ScenarioSet.build(
        (K, D, T), dt, demand=pick("demand_"), temperature=arrays.get("temperature_c", zeros + 25.0),
        irradiance=arrays.get("irradiance", zeros), wind=arrays.get("wind_ms", zeros),
        price_buy=pick("price_buy_"), price_sell=pick("price_sell_"), pbar=pick("pbar_"),
        likelihood=meta["likelihood"], seed=seed)
