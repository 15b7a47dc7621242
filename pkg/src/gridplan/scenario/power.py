"""Operating power coefficients of PV panels and wind turbines."""
from __future__ import annotations

import numpy as np

from ..catalog import RenewableParams


def pv_coefficient(rp: RenewableParams, phi, t_p):
    """eta * phi * (1 - kappa (T - T_ref)), floored at 0; phi = 1 is rated irradiance."""
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise ValueError("irradiance must be nonnegative")
    out = np.maximum(rp.eta * phi * (1.0 - rp.kappa * (np.asarray(t_p, dtype=float) - rp.t_ref)), 0.0)
    return float(out) if out.ndim == 0 else out


def wind_coefficient(rp: RenewableParams, v):
    """Piecewise-linear power curve: 0 outside [cut-in, cut-out], ramp to 1 at rated speed."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("wind speed must be nonnegative")
    ramp = (v - rp.v_cut_in) / (rp.v_rated - rp.v_cut_in)
    out = np.where(v < rp.v_cut_in, 0.0,
                   np.where(v < rp.v_rated, ramp, np.where(v <= rp.v_cut_out, 1.0, 0.0)))
    return float(out) if out.ndim == 0 else out
