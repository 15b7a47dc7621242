"""Empirical weather and demand models.

Time ``t`` is in days, ``t_h`` in hours of the day. The seasonal terms use a 365-day
period in radians.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

OMEGA = 2.0 * np.pi / 365.0


class ModelInputError(ValueError):
    pass


def _seasonal(p1, p2, p3, t):
    return p1 * np.sin(OMEGA * (t + p2)) + p3


def _daily_temperature(p, x):
    return _seasonal(p[0], p[1], p[2], x["t"])


def _hourly_temperature(p, x):
    th = x["t_h"]
    return (p[0] * th**4 + p[1] * th**3 + p[2] * th**2 + p[3] * th + p[4]) * x["T_daily"]


def _solar(p, x):
    mu = _seasonal(p[0], p[1], p[2], x["t"])
    sigma = _seasonal(p[3], p[4], p[5], x["t"])
    z = (x["t_h"] - mu) / sigma
    return x["T_daily"] / (sigma * np.sqrt(2.0 * np.pi)) * np.exp(-0.5 * z * z)


def _weibull_cdf(p, x):
    shape, scale = p[0], p[1]
    v = np.maximum(x["v"], 0.0)
    return 1.0 - np.exp(-((v / scale) ** shape))


def _population(p, x):
    t = x["t"]
    return p[0] + p[1] * t + p[2] * t * t


def _daily_demand(p, x):
    return _seasonal(p[0], p[1], p[2], x["t"]) + p[3] * x["P_t"]


def _hourly_demand(p, x):
    th = x["t_h"]
    return (p[0] * th**4 + p[1] * th**3 + p[2] * th**2 + p[3] * th) * x["E_daily"]


@dataclass(frozen=True)
class ModelKind:
    name: str
    params: tuple[str, ...]
    inputs: tuple[str, ...]
    fn: Callable
    nonnegative: bool = False  # physically nonnegative output, clamped when sampling

    @property
    def arity(self) -> int:
        return len(self.params)


KINDS: dict[str, ModelKind] = {k.name: k for k in (
    ModelKind("daily_temperature", ("p_daily_1", "p_daily_2", "p_daily_3"), ("t",), _daily_temperature),
    ModelKind("hourly_temperature", tuple(f"p_airT_{i}" for i in range(1, 6)), ("t_h", "T_daily"),
              _hourly_temperature),
    ModelKind("solar_irradiance", ("p_solar_mu1", "p_solar_mu2", "p_solar_mu3",
                                   "p_solar_sigma1", "p_solar_sigma2", "p_solar_sigma3"),
              ("t", "t_h", "T_daily"), _solar, nonnegative=True),
    ModelKind("weibull_wind", ("shape", "scale"), ("v",), _weibull_cdf),
    ModelKind("population", ("P_0", "P_p1", "P_p2"), ("t",), _population, nonnegative=True),
    ModelKind("daily_demand", tuple(f"p_e_daily_{i}" for i in range(1, 5)), ("t", "P_t"),
              _daily_demand, nonnegative=True),
    ModelKind("hourly_demand", tuple(f"p_E_h{i}" for i in range(1, 5)), ("t_h", "E_daily"),
              _hourly_demand, nonnegative=True),
)}


def get_kind(kind: str | ModelKind) -> ModelKind:
    if isinstance(kind, ModelKind):
        return kind
    try:
        return KINDS[kind]
    except KeyError:
        raise ModelInputError(f"unknown model kind {kind!r}") from None


def _check(k: ModelKind, params, inputs: Mapping[str, object]):
    p = np.asarray(params, dtype=float)
    if p.shape != (k.arity,):
        raise ModelInputError(f"{k.name} takes {k.arity} parameters, got {p.size}")
    missing = [v for v in k.inputs if v not in inputs]
    if missing:
        raise ModelInputError(f"{k.name} needs input {missing[0]!r}")
    return p, {v: np.asarray(inputs[v], dtype=float) for v in k.inputs}


def eval_model(kind: str | ModelKind, params, inputs: Mapping[str, object]):
    """Model value; scalar inputs give a float, array inputs an array."""
    k = get_kind(kind)
    p, x = _check(k, params, inputs)
    y = k.fn(p, x)
    return float(y) if np.ndim(y) == 0 else y


def fd_step(p: np.ndarray) -> np.ndarray:
    return 1e-6 * np.maximum(1.0, np.abs(p))


def param_jacobian(kind: str | ModelKind, params, inputs: Mapping[str, object]) -> np.ndarray:
    """Central-difference d(model)/d(params); shape (N, arity) (N=1 for scalar inputs)."""
    k = get_kind(kind)
    p, x = _check(k, params, inputs)
    h = fd_step(p)
    cols = []
    for j in range(k.arity):
        up, dn = p.copy(), p.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        cols.append((np.atleast_1d(k.fn(up, x)) - np.atleast_1d(k.fn(dn, x))) / (2 * h[j]))
    return np.column_stack(cols)


def weibull_quantile(shape: float, scale: float, u):
    u = np.asarray(u, dtype=float)
    return scale * (-np.log1p(-u)) ** (1.0 / shape)


def weibull_cdf(shape: float, scale: float, v):
    return _weibull_cdf((shape, scale), {"v": np.asarray(v, dtype=float)})
