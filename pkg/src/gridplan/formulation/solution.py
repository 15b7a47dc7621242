"""Structured plan solutions and the cost ledger."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..catalog import Catalog
from ..scenario.scenario_set import ScenarioSet
from .config import DAYS_PER_YEAR, PlanningConfig
from .model import MilpModel

INTEGRALITY_TOL = 1e-6


class SolutionError(ValueError):
    pass


@dataclass
class CostBreakdown:
    initial: float
    operational: list[float]  # per year, without the peak term
    maintenance: list[float]
    peak_penalty: float

    @property
    def total(self) -> float:
        return self.initial + sum(self.operational) + sum(self.maintenance) + self.peak_penalty


@dataclass
class PlanSolution:
    shape: tuple[int, int, int]
    installed: dict[str, bool]
    rated_power: dict[str, float]
    capacity: dict[str, float]
    p: dict[str, np.ndarray]
    kc: dict[str, np.ndarray]
    pch: dict[str, np.ndarray]
    pdch: dict[str, np.ndarray]
    ks: dict[str, np.ndarray]
    soc: dict[str, np.ndarray]
    soc0: dict[str, np.ndarray]
    u: dict[str, np.ndarray]
    yx: dict[str, np.ndarray]
    sp: dict[str, np.ndarray]
    xi: float
    costs: CostBreakdown
    co2_daily: np.ndarray
    objective: float
    bound: float = math.nan
    gap: float = math.nan
    status: str = ""
    cost_discrepancy: float = 0.0

    def chosen(self) -> list[str]:
        return [i for i, on in self.installed.items() if on]

    def to_dict(self) -> dict[str, Any]:
        arr = lambda d: {k: np.asarray(v).tolist() for k, v in d.items()}
        c = self.costs
        return {
            "shape": list(self.shape),
            "status": self.status,
            "objective": self.objective,
            "bound": _jfloat(self.bound),
            "gap": _jfloat(self.gap),
            "cost_discrepancy": self.cost_discrepancy,
            "costs": {"initial": c.initial, "operational": c.operational,
                      "maintenance": c.maintenance, "peak_penalty": c.peak_penalty, "total": c.total},
            "equipment": {i: {"installed": self.installed[i], "rated_power": self.rated_power[i],
                              "capacity": self.capacity[i]} for i in self.installed},
            "xi": self.xi,
            "co2_daily": self.co2_daily.tolist(),
            "p": arr(self.p), "kc": arr(self.kc), "pch": arr(self.pch), "pdch": arr(self.pdch),
            "ks": arr(self.ks), "soc": arr(self.soc), "soc0": arr(self.soc0),
            "u": arr(self.u), "yx": arr(self.yx), "sp": arr(self.sp),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PlanSolution":
        arr = lambda x: {k: np.asarray(v, dtype=float) for k, v in x.items()}
        eq = d["equipment"]
        c = d["costs"]
        return cls(
            tuple(d["shape"]), {i: bool(v["installed"]) for i, v in eq.items()},
            {i: float(v["rated_power"]) for i, v in eq.items()},
            {i: float(v["capacity"]) for i, v in eq.items()},
            arr(d["p"]), arr(d["kc"]), arr(d["pch"]), arr(d["pdch"]), arr(d["ks"]),
            arr(d["soc"]), arr(d["soc0"]), arr(d["u"]), arr(d["yx"]), arr(d["sp"]),
            float(d["xi"]), CostBreakdown(c["initial"], list(c["operational"]),
                                          list(c["maintenance"]), c["peak_penalty"]),
            np.asarray(d["co2_daily"], dtype=float), float(d["objective"]),
            _pfloat(d.get("bound")), _pfloat(d.get("gap")), d.get("status", ""),
            float(d.get("cost_discrepancy", 0.0)))


def _jfloat(x: float):
    return None if x is None or not math.isfinite(x) else x


def _pfloat(x) -> float:
    return math.nan if x is None else float(x)


def compute_costs(sol: PlanSolution, c: Catalog, s: ScenarioSet, cfg: PlanningConfig) -> CostBreakdown:
    """Initial, per-year operational/maintenance and peak terms, straight from the cost formulas."""
    K, D, T = s.shape
    initial = 0.0
    for e in c.equipment:
        a = 1.0 if sol.installed[e.id] else 0.0
        initial += e.alpha0 * sol.rated_power[e.id] + e.gamma0 * a
        if e.is_storage:
            initial += e.beta0 * sol.capacity[e.id]
    operational, maintenance = [], []
    for k in range(K):
        esc = (1.0 + cfg.inflation) ** k
        op = 0.0
        for d in range(D):
            day = 0.0
            for r in c.resources:
                n = r.id
                day += float(np.sum(s.sell(n)[k, d] * sol.yx[n][k, d] + s.buy(n)[k, d] * sol.u[n][k, d]))
            op += cfg.day_weights[d] * cfg.dt * esc * day
        operational.append(op)
        mt = 0.0
        for e in c.equipment:
            a = 1.0 if sol.installed[e.id] else 0.0
            mt += esc * (e.alpha_k * sol.rated_power[e.id] + e.gamma_k * a)
            if e.is_storage:
                mt += esc * e.beta_k * sol.capacity[e.id]
        maintenance.append(mt)
    peak = DAYS_PER_YEAR * K * T * sol.xi
    return CostBreakdown(initial, operational, maintenance, peak)


def extract_solution(m: MilpModel, x: np.ndarray, c: Catalog, s: ScenarioSet, cfg: PlanningConfig,
                     *, bound: float = math.nan, status: str = "") -> PlanSolution:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n_vars,):
        raise SolutionError(f"solution has {x.size} entries, model has {m.n_vars} variables")
    xb = x[m.binary]
    off = np.abs(xb - np.round(xb))
    if off.size and off.max() > INTEGRALITY_TOL:
        j = np.flatnonzero(m.binary)[int(np.argmax(off))]
        raise SolutionError(f"integrality violated: {m.names[j]} = {x[j]:.6g}")
    x = x.copy()
    x[m.binary] = np.round(xb)
    objective = m.objective(x)

    K, D, T = s.shape
    vi = m.var_index

    def grid(family, head):
        out = np.zeros((K, D, T))
        idx = vi.get(family, {})
        for k in range(K):
            for d in range(D):
                for t in range(T):
                    out[k, d, t] = x[idx[(head, k, d, t)]]
        return out

    def daily(family, head):
        out = np.zeros((K, D))
        idx = vi.get(family, {})
        for k in range(K):
            for d in range(D):
                out[k, d] = x[idx[(head, k, d)]]
        return out

    installed = {e.id: bool(x[vi["a"][(e.id,)]] > 0.5) for e in c.equipment}
    rated = {e.id: float(x[vi["rp"][(e.id,)]]) for e in c.equipment}
    cap = {e.id: float(x[vi["b"][(e.id,)]]) if e.is_storage else 0.0 for e in c.equipment}
    gens = [e.id for e in c.equipment if e.is_generator]
    stor = [e.id for e in c.equipment if e.is_storage]
    sol = PlanSolution(
        shape=(K, D, T), installed=installed, rated_power=rated, capacity=cap,
        p={i: grid("p", i) for i in gens}, kc={i: grid("kc", i) for i in gens},
        pch={i: grid("pch", i) for i in stor}, pdch={i: grid("pdch", i) for i in stor},
        ks={i: grid("ks", i) for i in stor}, soc={i: grid("soc", i) for i in stor},
        soc0={i: daily("soc0", i) for i in stor},
        u={n: grid("u", n) for n in c.resource_ids}, yx={n: grid("yx", n) for n in c.resource_ids},
        sp={n: daily("sp", n) for n in c.resource_ids},
        xi=float(x[vi["xi"][()]]), costs=CostBreakdown(0.0, [], [], 0.0),
        co2_daily=np.zeros((K, D)), objective=objective, bound=bound, status=status,
    )
    if cfg.co2 in sol.yx:
        sol.co2_daily = sol.yx[cfg.co2].sum(axis=2)
    sol.costs = compute_costs(sol, c, s, cfg)
    sol.cost_discrepancy = abs(sol.costs.total - objective) / max(1.0, abs(objective))
    if math.isfinite(bound):
        sol.gap = max(objective - bound, 0.0) / max(abs(objective), 1e-9)
    return sol
