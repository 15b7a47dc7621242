"""Re-evaluate every constraint family of a plan directly from catalog and scenario data.

Violations are scaled: ``excess / max(1, |rhs|, largest |term|)`` so that a balance row
carrying thousands of kW is judged on the same footing as a binary linking row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..catalog import Catalog
from ..scenario.scenario_set import ScenarioSet
from .build import import_cap, reserve_level, surplus_cap
from .config import PlanningConfig
from .solution import PlanSolution

FAMILIES = (
    "n_install", "rp_link", "b_link", "gen_commit", "bilinear", "storage_power",
    "storage_exclusion", "soc_bounds", "soc_cycle", "soc_dynamics", "nonnegativity",
    "balance", "reserve", "peak", "co2_cap", "import_cap", "surplus_cap", "integrality",
)


@dataclass
class FeasibilityReport:
    violations: dict[str, float] = field(default_factory=lambda: {f: 0.0 for f in FAMILIES})
    where: dict[str, str] = field(default_factory=dict)
    tol: float = 1e-6

    def record(self, family: str, v: float, where: str = "") -> None:
        if v > self.violations[family]:
            self.violations[family] = float(v)
            self.where[family] = where

    @property
    def ok(self) -> bool:
        return all(v <= self.tol for v in self.violations.values())

    def failed(self) -> list[str]:
        return [f for f in FAMILIES if self.violations[f] > self.tol]

    def worst(self) -> tuple[str, float]:
        f = max(FAMILIES, key=lambda k: self.violations[k])
        return f, self.violations[f]

    def lines(self) -> list[str]:
        out = []
        for f in FAMILIES:
            v = self.violations[f]
            mark = "ok" if v <= self.tol else "VIOLATED"
            loc = f"  at {self.where[f]}" if f in self.where and v > 0 else ""
            out.append(f"{f:<18} {v:.3e}  {mark}{loc}")
        return out


def _excess(lhs, rhs, scale):
    return np.maximum(lhs - rhs, 0.0) / np.maximum(1.0, scale)


def _le(rep: FeasibilityReport, family: str, lhs, rhs, *terms, label: str = "") -> None:
    """Record the worst violation of lhs <= rhs (arrays broadcast)."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = np.abs(rhs)
    for tm in terms:
        scale = np.maximum(scale, np.abs(tm))
    scale = np.maximum(scale, np.abs(lhs))
    v = _excess(lhs, rhs, scale)
    if v.size:
        i = int(np.argmax(v))
        rep.record(family, float(v.flat[i]), f"{label}{np.unravel_index(i, v.shape) if v.ndim else ''}")


def check_feasibility(sol: PlanSolution, c: Catalog, s: ScenarioSet, cfg: PlanningConfig,
                      tol: float = 1e-6) -> FeasibilityReport:
    rep = FeasibilityReport(tol=tol)
    K, D, T = s.shape
    dt = cfg.dt
    a = {e.id: 1.0 if sol.installed[e.id] else 0.0 for e in c.equipment}
    rp = sol.rated_power
    b = sol.capacity

    _le(rep, "n_install", sum(a.values()), cfg.max_installed)
    for e in c.equipment:
        _le(rep, "rp_link", e.rp_min * a[e.id], rp[e.id], label=e.id)
        _le(rep, "rp_link", rp[e.id], e.rp_max * a[e.id], label=e.id)
        if e.is_storage:
            _le(rep, "b_link", e.b_min * a[e.id], b[e.id], label=e.id)
            _le(rep, "b_link", b[e.id], e.b_max * a[e.id], label=e.id)
        elif b.get(e.id, 0.0) != 0.0:
            rep.record("b_link", abs(b[e.id]), e.id)

    def binary_check(name, arr):
        off = np.abs(arr - np.round(arr))
        off = np.maximum(off, np.maximum(-arr, 0) + np.maximum(arr - 1, 0))
        if off.size:
            rep.record("integrality", float(off.max()), name)

    for e in c.equipment:
        if e.is_generator:
            p, kc = sol.p[e.id], sol.kc[e.id]
            binary_check(f"kc[{e.id}]", kc)
            _le(rep, "nonnegativity", -p, 0.0, label=f"p[{e.id}]")
            m, M = e.p_frac_min, e.p_frac_max
            _le(rep, "gen_commit", m * (rp[e.id] - (1 - kc) * e.rp_max), p, m * rp[e.id], m * e.rp_max,
                label=f"{e.id} lower ")
            _le(rep, "gen_commit", p, M * rp[e.id], label=f"{e.id} upper ")
            _le(rep, "gen_commit", p, M * e.rp_max * kc, label=f"{e.id} on/off ")
            on = np.round(kc) >= 1
            # bilinear meaning: off -> zero output, on -> inside the fraction band of rp
            _le(rep, "bilinear", np.where(on, 0.0, np.abs(p)), 0.0, label=f"{e.id} off ")
            _le(rep, "bilinear", np.where(on, m * rp[e.id] - p, 0.0), 0.0, m * rp[e.id], label=f"{e.id} on-lo ")
            _le(rep, "bilinear", np.where(on, p - M * rp[e.id], 0.0), 0.0, M * rp[e.id], label=f"{e.id} on-hi ")
        if e.is_storage:
            pch, pdch, ks = sol.pch[e.id], sol.pdch[e.id], sol.ks[e.id]
            soc, soc0 = sol.soc[e.id], sol.soc0[e.id]
            binary_check(f"ks[{e.id}]", ks)
            M = e.p_frac_max
            for name, arr in (("pch", pch), ("pdch", pdch), ("soc", soc)):
                _le(rep, "nonnegativity", -arr, 0.0, label=f"{name}[{e.id}]")
            _le(rep, "storage_power", pch, M * rp[e.id], label=f"{e.id} ch ")
            _le(rep, "storage_power", pdch, M * rp[e.id], label=f"{e.id} dch ")
            _le(rep, "storage_exclusion", pch, M * e.rp_max * ks, label=f"{e.id} ch ")
            _le(rep, "storage_exclusion", pdch, M * e.rp_max * (1 - ks), label=f"{e.id} dch ")
            both = np.minimum(pch, pdch)
            _le(rep, "storage_exclusion", both, 0.0, label=f"{e.id} simultaneous ")
            lo, hi = e.q_frac_min * b[e.id], e.q_frac_max * b[e.id]
            for name, arr in (("soc", soc), ("soc0", soc0)):
                _le(rep, "soc_bounds", lo - arr, 0.0, lo, label=f"{e.id} {name} lo ")
                _le(rep, "soc_bounds", arr - hi, 0.0, hi, label=f"{e.id} {name} hi ")
            prev = np.concatenate([soc0[:, :, None], soc[:, :, :-1]], axis=2)
            resid = soc - prev - dt * (pch - pdch)
            scale = np.maximum.reduce([np.abs(soc), np.abs(prev), dt * np.abs(pch), dt * np.abs(pdch)])
            v = np.abs(resid) / np.maximum(1.0, scale)
            rep.record("soc_dynamics", float(v.max()), e.id)
            cyc = np.abs(soc[:, :, -1] - soc0) / np.maximum(1.0, np.abs(soc0))
            rep.record("soc_cycle", float(cyc.max()), e.id)

    # resource balance, reserve, caps
    for r in c.resources:
        n = r.id
        u, yx, sp = sol.u[n], sol.yx[n], sol.sp[n]
        _le(rep, "nonnegativity", -u, 0.0, label=f"u[{n}]")
        _le(rep, "nonnegativity", -yx, 0.0, label=f"yx[{n}]")
        supply = u.copy()
        use = yx + sp[:, :, None] + s.d(n)
        mag = np.maximum.reduce([np.abs(u), np.abs(yx), np.broadcast_to(np.abs(sp)[:, :, None], u.shape),
                                 s.d(n)])
        for e in c.equipment:
            g, cn = e.gen.get(n, 0.0), e.cons.get(n, 0.0)
            if not (g or cn):
                continue
            if e.is_generator:
                gen_t, con_t = g * sol.p[e.id], cn * sol.p[e.id]
            elif e.is_storage:
                gen_t, con_t = g * sol.pdch[e.id], cn * sol.pch[e.id]
            else:
                out = s.pbar[e.id] * rp[e.id]
                gen_t, con_t = g * out, cn * out
            supply = supply + gen_t
            use = use + con_t
            mag = np.maximum.reduce([mag, np.abs(gen_t), np.abs(con_t)])
        v = np.abs(supply - use) / np.maximum(1.0, mag)
        i = int(np.argmax(v))
        rep.record("balance", float(v.flat[i]), f"{n}{np.unravel_index(i, v.shape)}")
        level = reserve_level(s, cfg, n)
        rep.record("reserve", float((np.abs(sp - level) / np.maximum(1.0, level)).max()), n)
        cap = import_cap(r, cfg)
        if math.isfinite(cap):
            _le(rep, "import_cap", u, cap, label=n)
        ycap = surplus_cap(s, r, cfg)
        fin = np.isfinite(ycap)
        if fin.any():
            _le(rep, "surplus_cap", yx[fin], ycap[fin][:, None], label=n)

    xi = sol.xi
    _le(rep, "nonnegativity", -xi, 0.0, label="xi")
    for e in c.equipment:
        if e.is_generator:
            g_el = e.gen.get(cfg.electricity, 0.0)
            _le(rep, "peak", cfg.delta * g_el * sol.p[e.id], xi, label=e.id)
    if math.isfinite(cfg.lco2) and cfg.co2 in sol.yx:
        daily = sol.yx[cfg.co2].sum(axis=2)
        _le(rep, "co2_cap", daily, cfg.lco2, label="co2")
    return rep
