"""Materialize the design-and-scheduling MILP from catalog, scenario and config.

Variable families (keys use zero-based year/day/interval indices):

    a[i] rp[i] b[i]                    installation, rated power, storage capacity
    kc[i,k,d,t] p[i,k,d,t]             generator commitment and output
    ks[i,k,d,t] pch[..] pdch[..]       storage mode and charge/discharge power
    soc0[i,k,d] soc[i,k,d,t]           storage state of charge
    u[n,k,d,t] yx[n,k,d,t] sp[n,k,d]   import, surplus, spinning reserve
    xi                                 peak penalty
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..catalog import Catalog, Resource
from ..scenario.scenario_set import ScenarioSet
from .config import DAYS_PER_YEAR, PlanningConfig
from .model import MilpModel, ModelBuilder


class FormulationError(ValueError):
    pass


def import_cap(res: Resource, cfg: PlanningConfig) -> float:
    if not res.purchasable:
        return 0.0
    if cfg.import_caps is not None and res.id in cfg.import_caps:
        return float(cfg.import_caps[res.id])
    return float(res.import_cap)


def surplus_fraction(res: Resource, cfg: PlanningConfig) -> float:
    if cfg.surplus_cap_fraction is not None and res.id in cfg.surplus_cap_fraction:
        return float(cfg.surplus_cap_fraction[res.id])
    return float(res.surplus_cap_fraction)


def reserve_level(s: ScenarioSet, cfg: PlanningConfig, n: str) -> np.ndarray:
    """Fixed spinning reserve per (year, day): rho_n times that day's peak demand."""
    rho = cfg.reserve_fraction.get(n, 0.0)
    return rho * s.d(n).max(axis=2)


def surplus_cap(s: ScenarioSet, res: Resource, cfg: PlanningConfig) -> np.ndarray:
    frac = surplus_fraction(res, cfg)
    if math.isinf(frac):
        return np.full(s.shape[:2], np.inf)
    return frac * s.d(res.id).max(axis=2)


def check_inputs(c: Catalog, s: ScenarioSet, cfg: PlanningConfig) -> None:
    want = (cfg.years, cfg.n_days, cfg.intervals)
    if tuple(s.shape) != want:
        raise FormulationError(f"scenario grid {tuple(s.shape)} does not match config {want}")
    if abs(s.dt - cfg.dt) > 1e-12:
        raise FormulationError(f"scenario interval {s.dt} h does not match config {cfg.dt} h")
    for e in c.equipment:
        if e.is_renewable and e.id not in s.pbar:
            raise FormulationError(f"renewable unit {e.id} has no operating coefficient series")
    rids = set(c.resource_ids)
    for n in s.demand:
        if n not in rids:
            raise FormulationError(f"scenario demand for undeclared resource {n!r}")


@dataclass(frozen=True)
class Census:
    variables: dict[str, int]
    rows: dict[str, int]
    n_binary: int
    n_continuous: int


def build_model(c: Catalog, s: ScenarioSet, cfg: PlanningConfig) -> MilpModel:
    check_inputs(c, s, cfg)
    K, D, T = s.shape
    dt = cfg.dt
    mb = ModelBuilder()
    grid = [(k, d, t) for k in range(K) for d in range(D) for t in range(T)]
    gens = [e for e in c.equipment if e.is_generator]
    stor = [e for e in c.equipment if e.is_storage]
    renew = [e for e in c.equipment if e.is_renewable]

    # sizing, with initial and maintenance cost
    maint = sum(cfg.escalation(k) for k in range(K))
    a, rp, b = {}, {}, {}
    for e in c.equipment:
        a[e.id] = mb.add_var("a", (e.id,), binary=True, cost=e.gamma0 + maint * e.gamma_k)
        rp[e.id] = mb.add_var("rp", (e.id,), ub=e.rp_max, cost=e.alpha0 + maint * e.alpha_k)
    for e in stor:
        b[e.id] = mb.add_var("b", (e.id,), ub=e.b_max, cost=e.beta0 + maint * e.beta_k)

    mb.add_row("n_install", (), {a[e.id]: 1.0 for e in c.equipment}, "L", cfg.max_installed)
    for e in c.equipment:
        mb.add_row("rp_lo", (e.id,), {rp[e.id]: 1.0, a[e.id]: -e.rp_min}, "G", 0.0)
        mb.add_row("rp_hi", (e.id,), {rp[e.id]: 1.0, a[e.id]: -e.rp_max}, "L", 0.0)
    for e in stor:
        mb.add_row("b_lo", (e.id,), {b[e.id]: 1.0, a[e.id]: -e.b_min}, "G", 0.0)
        mb.add_row("b_hi", (e.id,), {b[e.id]: 1.0, a[e.id]: -e.b_max}, "L", 0.0)

    # generators: disaggregated commitment
    p, kc = {}, {}
    for e in gens:
        hi = e.p_frac_max * e.rp_max
        for g in grid:
            key = (e.id,) + g
            kc[key] = mb.add_var("kc", key, binary=True)
            p[key] = mb.add_var("p", key, ub=hi)
            mb.add_row("gen_hi", key, {p[key]: 1.0, rp[e.id]: -e.p_frac_max}, "L", 0.0)
            mb.add_row("gen_on", key, {p[key]: 1.0, kc[key]: -hi}, "L", 0.0)
            if e.p_frac_min > 0:
                m = e.p_frac_min
                mb.add_row("gen_lo", key, {p[key]: 1.0, rp[e.id]: -m, kc[key]: -m * e.rp_max},
                           "G", -m * e.rp_max)

    # storage
    ks, pch, pdch, soc, soc0 = {}, {}, {}, {}, {}
    for e in stor:
        hi = e.p_frac_max * e.rp_max
        for k in range(K):
            for d in range(D):
                z = mb.add_var("soc0", (e.id, k, d), ub=e.q_frac_max * e.b_max)
                soc0[e.id, k, d] = z
                mb.add_row("soc0_lo", (e.id, k, d), {z: 1.0, b[e.id]: -e.q_frac_min}, "G", 0.0)
                mb.add_row("soc0_hi", (e.id, k, d), {z: 1.0, b[e.id]: -e.q_frac_max}, "L", 0.0)
        for g in grid:
            key = (e.id,) + g
            ks[key] = mb.add_var("ks", key, binary=True)
            pch[key] = mb.add_var("pch", key, ub=hi)
            pdch[key] = mb.add_var("pdch", key, ub=hi)
            soc[key] = mb.add_var("soc", key, ub=e.q_frac_max * e.b_max)
            mb.add_row("ch_hi", key, {pch[key]: 1.0, rp[e.id]: -e.p_frac_max}, "L", 0.0)
            mb.add_row("dch_hi", key, {pdch[key]: 1.0, rp[e.id]: -e.p_frac_max}, "L", 0.0)
            mb.add_row("ch_mode", key, {pch[key]: 1.0, ks[key]: -hi}, "L", 0.0)
            mb.add_row("dch_mode", key, {pdch[key]: 1.0, ks[key]: hi}, "L", hi)
            mb.add_row("soc_lo", key, {soc[key]: 1.0, b[e.id]: -e.q_frac_min}, "G", 0.0)
            mb.add_row("soc_hi", key, {soc[key]: 1.0, b[e.id]: -e.q_frac_max}, "L", 0.0)
        for k in range(K):
            for d in range(D):
                for t in range(T):
                    key = (e.id, k, d, t)
                    prev = soc0[e.id, k, d] if t == 0 else soc[e.id, k, d, t - 1]
                    mb.add_row("soc_dyn", key, [(soc[key], 1.0), (prev, -1.0),
                                                (pch[key], -dt), (pdch[key], dt)], "E", 0.0)
                mb.add_row("soc_cycle", (e.id, k, d),
                           {soc[e.id, k, d, T - 1]: 1.0, soc0[e.id, k, d]: -1.0}, "E", 0.0)

    # resources: import, surplus, reserve, balance
    u, yx, sp = {}, {}, {}
    for res in c.resources:
        n = res.id
        cap_u = import_cap(res, cfg)
        cap_y = surplus_cap(s, res, cfg)
        level = reserve_level(s, cfg, n)
        buy, sell, dem = s.buy(n), s.sell(n), s.d(n)
        for k in range(K):
            esc = cfg.escalation(k)
            for d in range(D):
                w = cfg.day_weights[d] * dt * esc
                sp[n, k, d] = mb.add_var("sp", (n, k, d), lb=level[k, d], ub=level[k, d])
                for t in range(T):
                    key = (n, k, d, t)
                    u[key] = mb.add_var("u", key, ub=cap_u, cost=w * buy[k, d, t])
                    yx[key] = mb.add_var("yx", key, ub=cap_y[k, d], cost=w * sell[k, d, t])
        for k, d, t in grid:
            key = (n, k, d, t)
            row: list[tuple[int, float]] = [(u[key], 1.0), (yx[key], -1.0), (sp[n, k, d], -1.0)]
            for e in gens:
                coef = e.gen.get(n, 0.0) - e.cons.get(n, 0.0)
                if coef:
                    row.append((p[(e.id, k, d, t)], coef))
            for e in stor:
                if e.gen.get(n, 0.0):
                    row.append((pdch[(e.id, k, d, t)], e.gen[n]))
                if e.cons.get(n, 0.0):
                    row.append((pch[(e.id, k, d, t)], -e.cons[n]))
            for e in renew:
                coef = (e.gen.get(n, 0.0) - e.cons.get(n, 0.0)) * s.pbar[e.id][k, d, t]
                if coef:
                    row.append((rp[e.id], coef))
            mb.add_row("balance", key, row, "E", float(dem[k, d, t]))

    # peak penalty and emission cap
    xi = mb.add_var("xi", (), cost=DAYS_PER_YEAR * K * T)
    for e in gens:
        g_el = e.gen.get(cfg.electricity, 0.0)
        if cfg.delta * g_el > 0:
            for g in grid:
                key = (e.id,) + g
                mb.add_row("peak", key, {xi: 1.0, p[key]: -cfg.delta * g_el}, "G", 0.0)
    if math.isfinite(cfg.lco2) and cfg.co2 in c.resource_ids:
        for k in range(K):
            for d in range(D):
                mb.add_row("co2_cap", (k, d), {yx[cfg.co2, k, d, t]: 1.0 for t in range(T)},
                           "L", cfg.lco2)
    return mb.build()


def census(m: MilpModel) -> Census:
    return Census(m.family_sizes(), m.row_family_sizes(), m.n_binary, m.n_vars - m.n_binary)
