"""Likelihood-banded sampling by inverse transform.

A band is an annulus in standard-normal space: likely |z| in [0,1), mid_likely [1,2),
unlikely [2,3). A draw picks a uniform sign and inverts the normal CDF on the band.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Any, Mapping, MutableMapping, Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .fitting import FittedModel, propagate_uncertainty
from .models import get_kind, weibull_quantile
from .scenario_set import normalize_likelihood

BANDS = {"likely": (0.0, 1.0), "mid_likely": (1.0, 2.0), "unlikely": (2.0, 3.0)}


def band_z(likelihood: str, rng: np.random.Generator, size=None):
    """Signed standard-normal deviate restricted to the likelihood band."""
    a, b = BANDS[normalize_likelihood(likelihood)]
    lo, hi = ndtr(a), ndtr(b)
    u = lo + (hi - lo) * rng.random(size)
    z = ndtri(u)
    # ndtri can land a hair outside [a, b) when u is at the end of the interval
    z = np.clip(z, a, np.nextafter(b, a))
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    out = sign * z
    return float(out) if size is None else out


def band_of(z) -> np.ndarray:
    """0, 1, 2 for |z| in [0,1), [1,2), [2,3); 3 beyond."""
    return np.minimum(np.floor(np.abs(np.asarray(z, dtype=float))), 3).astype(int)


def sample_band(m: FittedModel, inputs: Mapping[str, Any], likelihood: str, rng: np.random.Generator,
                clamp: Optional[bool] = None, counter: Optional[MutableMapping[str, int]] = None) -> float:
    """mean + s*z*sqrt(cov_y + mse), clamped at 0 for nonnegative quantities.

    ``clamp`` defaults to the model kind's nonnegativity; clamp events increment
    ``counter[kind]``.
    """
    mean = float(m.predict(inputs))
    z = band_z(likelihood, rng)
    var = float(propagate_uncertainty(m, inputs)) + m.mse
    value = mean + z * math.sqrt(max(var, 0.0))
    if clamp is None:
        clamp = get_kind(m.kind).nonnegative
    if clamp and value < 0:
        value = 0.0
        if counter is not None:
            counter[m.kind] = counter.get(m.kind, 0) + 1
    return value


def sample_wind(m: FittedModel, likelihood: str, rng: np.random.Generator) -> float:
    """Band-restricted quantile of a fitted Weibull (shape, scale)."""
    shape, scale = float(m.params[0]), float(m.params[1])
    u = float(ndtr(band_z(likelihood, rng)))
    return float(weibull_quantile(shape, scale, u))


def band_masses(z) -> dict[str, float]:
    z = np.asarray(z, dtype=float)
    c = Counter(band_of(z).tolist())
    n = max(z.size, 1)
    return {name: c.get(i, 0) / n for i, name in enumerate(BANDS)}
