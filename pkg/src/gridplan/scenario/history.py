"""Historical time series and fitting of the full model set."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from .fitting import FitError, FitOptions, FittedModel, fit_model, t_quantile
from .models import KINDS, OMEGA

log = logging.getLogger(__name__)

COLUMNS = ("temperature_c", "wind_ms", "irradiance", "demand_kwh", "population")
ALL_KINDS = tuple(KINDS)
REQUIRED_COLUMN = {
    "daily_temperature": "temperature_c", "hourly_temperature": "temperature_c",
    "solar_irradiance": "irradiance", "weibull_wind": "wind_ms", "population": "population",
    "daily_demand": "demand_kwh", "hourly_demand": "demand_kwh",
}
MIN_BUCKET_SAMPLES = 30


class HistoryError(ValueError):
    pass


@dataclass
class History:
    """Records sorted by time; ``t`` is days since Jan 1 of ``epoch_year``."""

    epoch_year: int
    t: np.ndarray
    hour: np.ndarray
    month: np.ndarray
    columns: dict[str, np.ndarray]  # nan where missing

    def __len__(self) -> int:
        return self.t.size

    def has(self, col: str) -> bool:
        return col in self.columns and np.isfinite(self.columns[col]).any()

    @property
    def day(self) -> np.ndarray:
        return np.floor(self.t).astype(int)


def read_history(path: str | Path) -> History:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "timestamp" not in reader.fieldnames:
            raise HistoryError(f"{path}: missing 'timestamp' column")
        present = [c for c in COLUMNS if c in reader.fieldnames]
        stamps, vals = [], []
        for line, row in enumerate(reader, start=2):
            try:
                stamps.append(datetime.fromisoformat(row["timestamp"].strip()))
            except ValueError:
                raise HistoryError(f"{path}:{line}: bad timestamp {row['timestamp']!r}") from None
            rec = []
            for c in present:
                cell = (row.get(c) or "").strip()
                try:
                    rec.append(float(cell) if cell else math.nan)
                except ValueError:
                    raise HistoryError(f"{path}:{line}: column {c}: not a number: {cell!r}") from None
            vals.append(rec)
    if not stamps:
        raise HistoryError(f"{path}: no records")
    return _make_history(stamps, np.array(vals, dtype=float).reshape(len(stamps), len(present)), present)


def _make_history(stamps: list[datetime], vals: np.ndarray, present: list[str]) -> History:
    order = sorted(range(len(stamps)), key=lambda i: stamps[i])
    stamps = [stamps[i] for i in order]
    vals = vals[order]
    epoch = datetime(stamps[0].year, 1, 1, tzinfo=stamps[0].tzinfo)
    t = np.array([(s - epoch).total_seconds() / 86400.0 for s in stamps])
    hour = np.array([s.hour + s.minute / 60.0 + s.second / 3600.0 for s in stamps])
    month = np.array([s.month for s in stamps])
    return History(epoch.year, t, hour, month, {c: vals[:, j] for j, c in enumerate(present)})


def write_history(path: str | Path, stamps: Iterable[datetime], columns: Mapping[str, np.ndarray]) -> None:
    stamps = list(stamps)
    cols = [c for c in COLUMNS if c in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp"] + cols)
        for i, s in enumerate(stamps):
            row = [s.isoformat()]
            for c in cols:
                v = columns[c][i]
                row.append("" if not np.isfinite(v) else repr(float(v)))
            w.writerow(row)


# -- model set -------------------------------------------------------------

def bucket_key(month: int, hour: float) -> str:
    return f"m{int(month):02d}_b{int(hour // 6)}"


@dataclass(frozen=True)
class ModelSet:
    models: Mapping[str, FittedModel]
    wind_buckets: Mapping[str, FittedModel] = field(default_factory=dict)
    epoch_year: int = 2020

    def __getitem__(self, kind: str) -> FittedModel:
        return self.models[kind]

    def wind_model(self, month: int, hour: float) -> FittedModel:
        return self.wind_buckets.get(bucket_key(month, hour), self.models["weibull_wind"])

    def missing(self) -> list[str]:
        return [k for k in ALL_KINDS if k not in self.models]

    def diagnostics(self, confidence: float = 0.95) -> dict[str, dict[str, Any]]:
        out = {}
        for k in ALL_KINDS:
            if k not in self.models:
                continue
            m = self.models[k]
            out[k] = {"mse": m.mse, "rmse": math.sqrt(m.mse), "converged": m.converged,
                      "rank_deficient": m.rank_deficient, "iterations": m.iterations,
                      "confidence": confidence, "lambda": t_quantile(confidence, m.dof)}
        return out

    def to_json(self, confidence: Optional[float] = None) -> str:
        doc: dict[str, Any] = {
            "epoch_year": self.epoch_year,
            "models": [self.models[k].to_dict() for k in ALL_KINDS if k in self.models],
            "wind_buckets": {b: self.wind_buckets[b].to_dict() for b in sorted(self.wind_buckets)},
        }
        if confidence is not None:
            doc["diagnostics"] = self.diagnostics(confidence)
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelSet":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise HistoryError(f"models file is not valid JSON: {e}") from None
        models = {d["kind"]: FittedModel.from_dict(d) for d in doc["models"]}
        buckets = {b: FittedModel.from_dict(d) for b, d in doc.get("wind_buckets", {}).items()}
        return cls(models, buckets, int(doc.get("epoch_year", 2020)))

    def write(self, path: str | Path, confidence: Optional[float] = None) -> None:
        Path(path).write_text(self.to_json(confidence), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "ModelSet":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# -- initial guesses -------------------------------------------------------

def _seasonal_init(t: np.ndarray, y: np.ndarray, extra: Optional[np.ndarray] = None) -> np.ndarray:
    """Grid over the phase; amplitude, offset (and an extra linear term) by least squares."""
    best, best_ssr = None, math.inf
    for ph in np.arange(0.0, 365.0, 2.5):
        cols = [np.sin(OMEGA * (t + ph)), np.ones_like(t)]
        if extra is not None:
            cols.append(extra)
        A = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = A @ coef - y
        s = float(r @ r)
        if s < best_ssr:
            best_ssr, best = s, (coef, ph)
    coef, ph = best
    if coef[0] < 0:  # keep a positive amplitude
        coef = coef.copy()
        coef[0] = -coef[0]
        ph = (ph + 182.5) % 365.0
    out = [coef[0], ph, coef[1]]
    if extra is not None:
        out.append(coef[2])
    return np.array(out)


def _poly_init(th: np.ndarray, scale: np.ndarray, y: np.ndarray, degrees) -> np.ndarray:
    A = np.column_stack([th ** d * scale for d in degrees])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def weibull_init(v: np.ndarray) -> np.ndarray:
    v = v[v > 0]
    mean, sd = float(v.mean()), float(v.std())
    shape = max((sd / mean) ** -1.086, 0.3) if sd > 0 else 2.0
    return np.array([shape, mean / gamma_fn(1.0 + 1.0 / shape)])


def fit_weibull(v: np.ndarray, options: Optional[FitOptions] = None) -> FittedModel:
    """Regress the Weibull CDF on the empirical CDF (Hazen plotting positions)."""
    v = np.sort(np.asarray(v, dtype=float))
    v = v[np.isfinite(v)]
    if v.size == 0 or not (v > 0).any():
        raise FitError("weibull_wind: no positive wind speeds")
    ecdf = (np.arange(1, v.size + 1) - 0.5) / v.size
    return fit_model("weibull_wind", {"v": v}, ecdf, weibull_init(v), options)


# -- fitting the whole set ---------------------------------------------------

def _daily_means(h: History, col: str) -> tuple[np.ndarray, np.ndarray, dict[int, float]]:
    vals = h.columns[col]
    ok = np.isfinite(vals)
    days = h.day[ok]
    uniq = np.unique(days)
    means = np.array([vals[ok][days == d].mean() for d in uniq])
    return uniq + 0.5, means, dict(zip(uniq.tolist(), means.tolist()))


def fit_history(h: History, kinds: Iterable[str] = ALL_KINDS, options: Optional[FitOptions] = None,
                min_bucket: int = MIN_BUCKET_SAMPLES) -> ModelSet:
    kinds = list(kinds)
    for k in kinds:
        if k not in KINDS:
            raise HistoryError(f"unknown model kind {k!r}")
        col = REQUIRED_COLUMN[k]
        if not h.has(col):
            raise HistoryError(f"{k} needs the {col!r} column, which is missing or empty")
    out: dict[str, FittedModel] = {}
    buckets: dict[str, FittedModel] = {}
    day_t = h.day + 0.5

    if {"daily_temperature", "hourly_temperature", "solar_irradiance"} & set(kinds):
        td, tmean, tmap = _daily_means(h, "temperature_c")
    if "daily_temperature" in kinds:
        out["daily_temperature"] = fit_model("daily_temperature", {"t": td}, tmean,
                                             _seasonal_init(td, tmean), options)
    if "hourly_temperature" in kinds:
        temp = h.columns["temperature_c"]
        ok = np.isfinite(temp)
        Td = np.array([tmap[d] for d in h.day[ok]])
        x = {"t_h": h.hour[ok], "T_daily": Td}
        init = _poly_init(x["t_h"], Td, temp[ok], (4, 3, 2, 1, 0))
        out["hourly_temperature"] = fit_model("hourly_temperature", x, temp[ok], init, options)
    if "solar_irradiance" in kinds:
        s = h.columns["irradiance"]
        ok = np.isfinite(s) & np.isin(h.day, list(tmap))
        Td = np.array([tmap[d] for d in h.day[ok]])
        x = {"t": day_t[ok], "t_h": h.hour[ok], "T_daily": Td}
        out["solar_irradiance"] = fit_model("solar_irradiance", x, s[ok], _solar_init(h, ok), options)
    if "weibull_wind" in kinds:
        v = h.columns["wind_ms"]
        ok = np.isfinite(v)
        out["weibull_wind"] = fit_weibull(v[ok], options)
        keys = np.array([bucket_key(m, hr) for m, hr in zip(h.month[ok], h.hour[ok])])
        for key in sorted(set(keys.tolist())):
            vb = v[ok][keys == key]
            if vb.size >= min_bucket and (vb > 0).sum() >= 3:
                try:
                    buckets[key] = fit_weibull(vb, options)
                except FitError as e:
                    log.warning("wind bucket %s: %s; using the global fit", key, e)
    if {"population", "daily_demand"} & set(kinds):
        pop = h.columns.get("population")
        if pop is not None and np.isfinite(pop).sum() > 3:
            ok = np.isfinite(pop)
            init = np.polyfit(h.t[ok], pop[ok], 2)[::-1]
            out["population"] = fit_model("population", {"t": h.t[ok]}, pop[ok], init, options)
        elif "population" in kinds or "daily_demand" in kinds:
            raise HistoryError("population needs at least 4 observations in the 'population' column")
    if {"daily_demand", "hourly_demand"} & set(kinds):
        dem = h.columns["demand_kwh"]
        ok = np.isfinite(dem)
        dd, dmean, _ = _daily_means(h, "demand_kwh")
        edaily = 24.0 * dmean  # hourly records: daily energy = 24 x mean hourly energy
        emap = dict(zip((dd - 0.5).astype(int).tolist(), edaily.tolist()))
        if "daily_demand" in kinds:
            pt = np.asarray(out["population"].predict({"t": dd}))
            init = _seasonal_init(dd, edaily, pt)
            out["daily_demand"] = fit_model("daily_demand", {"t": dd, "P_t": pt}, edaily, init, options)
        if "hourly_demand" in kinds:
            Ed = np.array([emap[d] for d in h.day[ok]])
            x = {"t_h": h.hour[ok], "E_daily": Ed}
            init = _poly_init(x["t_h"], Ed, dem[ok], (4, 3, 2, 1))
            out["hourly_demand"] = fit_model("hourly_demand", x, dem[ok], init, options)
    models = {k: out[k] for k in ALL_KINDS if k in out and k in kinds}
    return ModelSet(models, buckets, h.epoch_year)


def _solar_init(h: History, ok: np.ndarray) -> np.ndarray:
    s = np.maximum(h.columns["irradiance"][ok], 0.0)
    days, hrs = h.day[ok], h.hour[ok]
    dt, mus, sds = [], [], []
    for d in np.unique(days):
        sel = days == d
        w = s[sel]
        if w.sum() <= 0:
            continue
        mu = float(np.average(hrs[sel], weights=w))
        sd = float(np.sqrt(np.average((hrs[sel] - mu) ** 2, weights=w)))
        dt.append(d + 0.5)
        mus.append(mu)
        sds.append(max(sd, 0.5))
    dt, mus, sds = np.array(dt), np.array(mus), np.array(sds)
    if dt.size < 4:
        return np.array([0.1, 0.0, 12.0, 0.1, 0.0, 3.0])
    return np.concatenate([_seasonal_init(dt, mus), _seasonal_init(dt, sds)])
