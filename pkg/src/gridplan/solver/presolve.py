"""MILP presolve: fixed-variable removal, singleton rows, redundant/empty rows,
activity-based bound propagation and big-M coefficient tightening.

The reduced model has the same integer-feasible set projected onto the kept
columns; :class:`PresolveMap` rebuilds full-space vectors exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..formulation.model import MilpModel

FEAS_TOL = 1e-9
BOUND_IMPROVE = 1e-7


class PresolveInfeasible(ValueError):
    """Presolve proved the model infeasible (conflicting bounds or rows)."""


@dataclass
class PresolveMap:
    n_full: int
    kept_cols: np.ndarray
    kept_rows: np.ndarray
    fixed_values: np.ndarray  # full-length, nan where the column is kept

    def expand(self, x_reduced: np.ndarray) -> np.ndarray:
        x = self.fixed_values.copy()
        x[self.kept_cols] = x_reduced
        return x

    def restrict(self, x_full: np.ndarray) -> np.ndarray:
        return np.asarray(x_full)[self.kept_cols]

    @property
    def is_identity(self) -> bool:
        return len(self.kept_cols) == self.n_full and not np.isfinite(self.fixed_values).any()


def _round_binary_bounds(lo: float, hi: float) -> tuple[float, float]:
    lo = float(math.ceil(lo - 1e-6)) if np.isfinite(lo) else lo
    hi = float(math.floor(hi + 1e-6)) if np.isfinite(hi) else hi
    return lo, hi


def presolve(model: MilpModel, max_passes: int = 25, tighten_coefficients: bool = True):
    """Return ``(reduced_model, mapping)``; raises PresolveInfeasible."""
    n, m = model.n_vars, model.n_rows
    lb = model.lb.astype(float).copy()
    ub = model.ub.astype(float).copy()
    binary = model.binary
    if np.any(lb > ub + FEAS_TOL):
        j = int(np.argmax(lb - ub))
        raise PresolveInfeasible(f"conflicting bounds on {model.names[j]}: {lb[j]} > {ub[j]}")
    A = model.A.tocsr()
    rows_c = [A.indices[A.indptr[i]:A.indptr[i + 1]].copy() for i in range(m)]
    rows_v = [A.data[A.indptr[i]:A.indptr[i + 1]].astype(float).copy() for i in range(m)]
    rhs = model.rhs.astype(float).copy()
    sense = model.sense.copy()
    row_alive = np.ones(m, dtype=bool)
    fixed = np.full(n, np.nan)

    def fix(j: int, v: float) -> None:
        if binary[j]:
            v = float(round(v))
        fixed[j] = v
        lb[j] = ub[j] = v

    def set_bounds(j: int, lo: float, hi: float) -> bool:
        if binary[j]:
            lo, hi = _round_binary_bounds(lo, hi)
        changed = False
        if lo > lb[j] + BOUND_IMPROVE * (1 + abs(lb[j]) if np.isfinite(lb[j]) else 1):
            lb[j] = lo
            changed = True
        if hi < ub[j] - BOUND_IMPROVE * (1 + abs(ub[j]) if np.isfinite(ub[j]) else 1):
            ub[j] = hi
            changed = True
        if lb[j] > ub[j]:
            if lb[j] - ub[j] <= 1e-7 * (1 + abs(ub[j])):
                lb[j] = ub[j]
            else:
                raise PresolveInfeasible(f"bounds of {model.names[j]} cross: {lb[j]} > {ub[j]}")
        return changed

    for _ in range(max_passes):
        changed = False
        # substitute newly fixed columns
        for j in np.flatnonzero((lb == ub) & np.isnan(fixed)):
            fix(int(j), lb[j])
            changed = True
        for i in range(m):
            if not row_alive[i]:
                continue
            cols, vals = rows_c[i], rows_v[i]
            if cols.size:
                fx = ~np.isnan(fixed[cols])
                if fx.any():
                    rhs[i] -= float(vals[fx] @ fixed[cols[fx]])
                    rows_c[i], rows_v[i] = cols[~fx], vals[~fx]
                    cols, vals = rows_c[i], rows_v[i]
            s, r = sense[i], rhs[i]
            tol = FEAS_TOL * (1 + abs(r))
            if cols.size == 0:
                bad = (s == "L" and r < -tol) or (s == "G" and r > tol) or (s == "E" and abs(r) > tol * 1e3)
                if bad:
                    raise PresolveInfeasible(f"row {model.row_names[i]} infeasible after fixing (rhs {r})")
                row_alive[i] = False
                changed = True
                continue
            if cols.size == 1:
                j, a = int(cols[0]), float(vals[0])
                v = r / a
                if s == "E":
                    set_bounds(j, v, v)
                elif (s == "L") == (a > 0):
                    set_bounds(j, -np.inf, v)
                else:
                    set_bounds(j, v, np.inf)
                row_alive[i] = False
                changed = True
                continue
            lo_j, hi_j = lb[cols], ub[cols]
            pos = vals > 0
            lo_terms = np.where(pos, vals * lo_j, vals * hi_j)
            hi_terms = np.where(pos, vals * hi_j, vals * lo_j)
            min_inf = ~np.isfinite(lo_terms)
            max_inf = ~np.isfinite(hi_terms)
            minact = float(lo_terms[~min_inf].sum()) if min_inf.sum() == 0 else -np.inf
            maxact = float(hi_terms[~max_inf].sum()) if max_inf.sum() == 0 else np.inf
            scale = 1 + abs(r) + max(abs(minact) if np.isfinite(minact) else 0, abs(maxact) if np.isfinite(maxact) else 0)
            if (s in "LE" and minact > r + 1e-9 * scale) or (s in "GE" and maxact < r - 1e-9 * scale):
                raise PresolveInfeasible(f"row {model.row_names[i]} cannot be satisfied within bounds")
            if (s == "L" and maxact <= r + 1e-12 * scale) or (s == "G" and minact >= r - 1e-12 * scale):
                row_alive[i] = False
                changed = True
                continue
            # bound propagation
            if s in "LE" and min_inf.sum() <= 1:
                base = float(lo_terms[~min_inf].sum())
                for k, j in enumerate(cols):
                    if min_inf.sum() == 1 and not min_inf[k]:
                        continue
                    rest = base - (0.0 if min_inf[k] else lo_terms[k])
                    bound = (r - rest) / vals[k]
                    if vals[k] > 0:
                        changed |= set_bounds(int(j), -np.inf, bound)
                    else:
                        changed |= set_bounds(int(j), bound, np.inf)
            if s in "GE" and max_inf.sum() <= 1:
                base = float(hi_terms[~max_inf].sum())
                for k, j in enumerate(cols):
                    if max_inf.sum() == 1 and not max_inf[k]:
                        continue
                    rest = base - (0.0 if max_inf[k] else hi_terms[k])
                    bound = (r - rest) / vals[k]
                    if vals[k] > 0:
                        changed |= set_bounds(int(j), bound, np.inf)
                    else:
                        changed |= set_bounds(int(j), -np.inf, bound)
            # big-M coefficient tightening on inequality rows
            if tighten_coefficients and s != "E" and np.isfinite(maxact if s == "L" else minact):
                sign = 1.0 if s == "L" else -1.0
                for k, j in enumerate(cols):
                    if not binary[j] or lb[j] != 0 or ub[j] != 1:
                        continue
                    c = sign * vals[k]
                    rr = sign * r
                    terms = sign * (hi_terms if s == "L" else lo_terms)
                    rest_max = float(terms.sum() - terms[k])
                    if c < 0 and rest_max < rr - c - 1e-9 * scale:
                        vals[k] = sign * (rr - rest_max)
                        changed = True
                    elif c > 0 and rest_max < rr - 1e-9 * scale:
                        d = rr - rest_max
                        vals[k] = sign * (c - d)
                        rhs[i] = sign * (rr - d)
                        r = rhs[i]
                        changed = True
                    if s == "L":
                        hi_terms = np.where(vals > 0, vals * ub[cols], vals * lb[cols])
                    else:
                        lo_terms = np.where(vals > 0, vals * lb[cols], vals * ub[cols])
        # empty columns
        used = np.zeros(n, dtype=bool)
        for i in np.flatnonzero(row_alive):
            used[rows_c[i]] = True
        for j in np.flatnonzero(~used & np.isnan(fixed)):
            c = model.c[j]
            if c > 0 and np.isfinite(lb[j]):
                fix(int(j), lb[j])
            elif c < 0 and np.isfinite(ub[j]):
                fix(int(j), ub[j])
            elif c == 0:
                fix(int(j), lb[j] if np.isfinite(lb[j]) else (ub[j] if np.isfinite(ub[j]) else 0.0))
            else:
                continue
            changed = True
        if not changed:
            break

    kept_cols = np.flatnonzero(np.isnan(fixed))
    # final substitution of anything fixed on the last pass
    for i in np.flatnonzero(row_alive):
        cols, vals = rows_c[i], rows_v[i]
        fx = ~np.isnan(fixed[cols])
        if fx.any():
            rhs[i] -= float(vals[fx] @ fixed[cols[fx]])
            rows_c[i], rows_v[i] = cols[~fx], vals[~fx]
    keep_rows = np.array([i for i in np.flatnonzero(row_alive) if rows_c[i].size > 0], dtype=int)
    for i in np.flatnonzero(row_alive):
        if rows_c[i].size == 0:
            s, r = sense[i], rhs[i]
            tol = 1e-7 * (1 + abs(r))
            if (s == "L" and r < -tol) or (s == "G" and r > tol) or (s == "E" and abs(r) > tol):
                raise PresolveInfeasible(f"row {model.row_names[i]} infeasible after fixing")
    newcol = -np.ones(n, dtype=int)
    newcol[kept_cols] = np.arange(kept_cols.size)
    data, ind, ptr = [], [], [0]
    for i in keep_rows:
        data.append(rows_v[i])
        ind.append(newcol[rows_c[i]])
        ptr.append(ptr[-1] + rows_c[i].size)
    A_red = sp.csr_matrix(
        (np.concatenate(data) if data else np.zeros(0),
         np.concatenate(ind) if ind else np.zeros(0, dtype=int), np.array(ptr)),
        shape=(keep_rows.size, kept_cols.size))
    fixed_full = fixed.copy()
    offset = model.obj_offset + float(np.nansum(model.c * np.where(np.isnan(fixed), 0.0, fixed)))
    reduced = MilpModel(
        names=[model.names[j] for j in kept_cols],
        lb=lb[kept_cols], ub=ub[kept_cols], binary=binary[kept_cols].copy(), A=A_red,
        sense=sense[keep_rows].copy(), rhs=rhs[keep_rows].copy(), c=model.c[kept_cols].copy(),
        row_names=[model.row_names[i] for i in keep_rows] if model.row_names else [],
        obj_offset=offset,
    )
    return reduced, PresolveMap(n, kept_cols, keep_rows, fixed_full)
