"""Text and CSV views of a solved plan."""
from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .catalog import Catalog
from .formulation.config import PlanningConfig
from .formulation.solution import PlanSolution
from .scenario.scenario_set import ScenarioSet
from .solver.bnb import MilpResult, NodeLogEntry


def _csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _cell(v: object) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _grid(shape):
    K, D, T = shape
    for k in range(K):
        for d in range(D):
            for t in range(T):
                yield k, d, t


# -- solve artifacts -------------------------------------------------------

def renewable_output(sol: PlanSolution, s: ScenarioSet, uid: str) -> np.ndarray:
    return s.pbar[uid] * sol.rated_power[uid]


def schedule_csv(sol: PlanSolution, cat: Catalog, s: ScenarioSet) -> str:
    """Long format: one row per installed unit and grid point."""
    rows = []
    for e in cat.equipment:
        if not sol.installed.get(e.id):
            continue
        out = renewable_output(sol, s, e.id) if e.is_renewable else None
        for k, d, t in _grid(sol.shape):
            ch = dch = soc = 0.0
            if e.is_generator:
                power, on = sol.p[e.id][k, d, t], int(round(sol.kc[e.id][k, d, t]))
            elif e.is_storage:
                ch, dch = sol.pch[e.id][k, d, t], sol.pdch[e.id][k, d, t]
                power, soc = dch - ch, sol.soc[e.id][k, d, t]
                on = int(round(sol.ks[e.id][k, d, t]))
            else:
                power, on = out[k, d, t], 1
            rows.append([e.id, k + 1, d + 1, t + 1, float(power), float(ch), float(dch), float(soc), on])
    return _csv(["equipment", "year", "day", "interval", "power", "charge", "discharge", "soc", "on"], rows)


def node_log_csv(entries: Sequence[NodeLogEntry]) -> str:
    return _csv(["node", "depth", "bound", "incumbent", "gap", "time"],
                ([e.node, e.depth, e.bound, e.incumbent, e.gap, round(e.time, 6)] for e in entries))


def summary_text(sol: PlanSolution, cat: Catalog, cfg: PlanningConfig,
                 result: Optional[MilpResult] = None) -> str:
    lines = ["Chosen equipment", ""]
    lines.append(f"{'Equipment':<34}{'Rated power [kW]':>18}{'Capacity [kWh]':>18}")
    chosen = sol.chosen()
    for i in chosen:
        cap = f"{sol.capacity[i]:.2f}" if cat.unit(i).is_storage else "-"
        lines.append(f"{i:<34}{sol.rated_power[i]:>18.2f}{cap:>18}")
    if not chosen:
        lines.append("(none)")
    c = sol.costs
    lines += ["", "Cost breakdown", ""]
    lines.append(f"{'initial':<34}{c.initial:>18.2f}")
    for k, (op, mt) in enumerate(zip(c.operational, c.maintenance), start=1):
        lines.append(f"{f'year {k} operational':<34}{op:>18.2f}")
        lines.append(f"{f'year {k} maintenance':<34}{mt:>18.2f}")
    lines.append(f"{'peak penalty':<34}{c.peak_penalty:>18.2f}")
    lines.append(f"{'total':<34}{c.total:>18.2f}")
    lines += ["", "Daily CO2 (surplus output of the co2 resource)", ""]
    cap = "unlimited" if math.isinf(cfg.lco2) else f"{cfg.lco2:.2f}"
    lines.append(f"{'year':>6}{'day':>6}{'co2':>18}{'limit':>18}")
    K, D = sol.co2_daily.shape
    for k in range(K):
        for d in range(D):
            lines.append(f"{k + 1:>6}{d + 1:>6}{sol.co2_daily[k, d]:>18.2f}{cap:>18}")
    lines += ["", "Solver", ""]
    lines.append(f"status      {sol.status}")
    lines.append(f"objective   {sol.objective:.6f}")
    lines.append(f"bound       {sol.bound:.6f}")
    lines.append(f"rel. gap    {sol.gap:.3e}")
    if result is not None:
        lines.append(f"abs. gap    {result.abs_gap:.6f}")
        lines.append(f"nodes       {result.nodes}")
    return "\n".join(lines) + "\n"


# -- plot data -------------------------------------------------------------

def balance_csv(sol: PlanSolution, cat: Catalog, s: ScenarioSet, resource: str) -> str:
    """Per-interval net contribution of every unit to one resource.

    Unit columns sum to demand + surplus + reserve - import.
    """
    units = []
    for e in cat.equipment:
        g, c = e.gen.get(resource, 0.0), e.cons.get(resource, 0.0)
        if not (g or c):
            continue
        if e.is_generator:
            units.append((e.id, (g - c) * sol.p[e.id]))
        elif e.is_storage:
            units.append((e.id, g * sol.pdch[e.id] - c * sol.pch[e.id]))
        else:
            units.append((e.id, (g - c) * renewable_output(sol, s, e.id)))
    zeros = np.zeros(sol.shape)
    u, yx = sol.u.get(resource, zeros), sol.yx.get(resource, zeros)
    sp = sol.sp.get(resource, np.zeros(sol.shape[:2]))
    dem = s.d(resource)
    header = ["year", "day", "interval", "hour"] + [uid for uid, _ in units] + \
        ["import", "surplus", "reserve", "demand"]
    hours = (np.arange(s.intervals) + 0.5) * s.dt
    rows = []
    for k, d, t in _grid(sol.shape):
        rows.append([k + 1, d + 1, t + 1, float(hours[t])] + [float(v[k, d, t]) for _, v in units] +
                    [float(u[k, d, t]), float(yx[k, d, t]), float(sp[k, d]), float(dem[k, d, t])])
    return _csv(header, rows)


def demand_csv(s: ScenarioSet) -> str:
    res = sorted(s.demand)
    hours = (np.arange(s.intervals) + 0.5) * s.dt
    rows = ([k + 1, d + 1, t + 1, float(hours[t])] + [float(s.demand[r][k, d, t]) for r in res]
            for k, d, t in _grid(s.shape))
    return _csv(["year", "day", "interval", "hour"] + res, rows)


def weather_csv(s: ScenarioSet) -> str:
    units = sorted(s.pbar)
    hours = (np.arange(s.intervals) + 0.5) * s.dt
    rows = ([k + 1, d + 1, t + 1, float(hours[t]), float(s.temperature[k, d, t]),
             float(s.irradiance[k, d, t]), float(s.wind[k, d, t])] +
            [float(s.pbar[u][k, d, t]) for u in units] for k, d, t in _grid(s.shape))
    return _csv(["year", "day", "interval", "hour", "temperature_c", "irradiance", "wind_ms"] +
                [f"pbar_{u}" for u in units], rows)


def soc_csv(sol: PlanSolution) -> str:
    """SOC per storage unit; interval 0 holds the initial state of each day."""
    rows = []
    K, D, T = sol.shape
    for uid in sorted(sol.soc):
        for k in range(K):
            for d in range(D):
                rows.append([uid, k + 1, d + 1, 0, float(sol.soc0[uid][k, d])])
                for t in range(T):
                    rows.append([uid, k + 1, d + 1, t + 1, float(sol.soc[uid][k, d, t])])
    return _csv(["equipment", "year", "day", "interval", "soc"], rows)
