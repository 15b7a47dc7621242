"""Locate the constraint family behind an infeasible model.

Each row gets nonnegative elastic slack and the continuous relaxation minimizes the
total slack. Slack is in row units, so relaxing a capacity limit never beats relaxing
the balance row it would serve. Families are ranked by the slack they need.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import MilpModel


@dataclass(frozen=True)
class InfeasibilityDiagnosis:
    families: list[tuple[str, float]]  # (family, total slack), largest first
    worst_row: str
    total: float

    @property
    def tightest(self) -> str:
        return self.families[0][0] if self.families else ""

    def lines(self) -> list[str]:
        out = [f"{fam}: slack {v:.6g}" for fam, v in self.families]
        if self.worst_row:
            out.append(f"largest single row: {self.worst_row}")
        return out


def _family(row_name: str) -> str:
    return row_name.split("[", 1)[0]


def diagnose_infeasibility(m: MilpModel, method: str = "simplex") -> InfeasibilityDiagnosis:
    from ..solver.lp import solve_lp  # local import keeps formulation free of solver imports at load

    n, r = m.n_vars, m.n_rows
    A = m.A.tocsr()
    # plus slack relaxes G/E rows upward, minus slack relaxes L/E rows downward
    up = m.sense != "L"
    dn = m.sense != "G"
    iu, idn = np.flatnonzero(up), np.flatnonzero(dn)
    Su = sp.csr_matrix((np.ones(iu.size), (iu, np.arange(iu.size))), shape=(r, iu.size))
    Sd = sp.csr_matrix((-np.ones(idn.size), (idn, np.arange(idn.size))), shape=(r, idn.size))
    Ael = sp.hstack([A, Su, Sd], format="csr")
    c = np.concatenate([np.zeros(n), np.ones(iu.size + idn.size)])
    ns = iu.size + idn.size
    lb = np.concatenate([np.maximum(m.lb, np.where(m.binary, 0.0, -np.inf)), np.zeros(ns)])
    ub = np.concatenate([np.minimum(m.ub, np.where(m.binary, 1.0, np.inf)), np.full(ns, np.inf)])
    el = MilpModel.from_arrays(c, Ael, m.sense, m.rhs, lb, ub)
    sol = solve_lp(el, method=method)
    if sol.status != "optimal":
        return InfeasibilityDiagnosis([("bounds", float("inf"))], "", float("inf"))
    s = sol.x[n:]
    per_row = np.zeros(r)
    np.add.at(per_row, iu, s[:iu.size])
    np.add.at(per_row, idn, s[iu.size:])
    fam: dict[str, float] = {}
    names = m.row_names
    for i in np.flatnonzero(per_row > 1e-9):
        f = _family(names[i])
        fam[f] = fam.get(f, 0.0) + float(per_row[i])
    ranked = sorted(fam.items(), key=lambda kv: (-kv[1], kv[0]))
    worst = names[int(np.argmax(per_row))] if r and per_row.max() > 1e-9 else ""
    return InfeasibilityDiagnosis(ranked, worst, float(per_row.sum()))
