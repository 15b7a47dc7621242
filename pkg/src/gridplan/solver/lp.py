"""Bounded-variable revised simplex.

The LP ``min c.x  s.t.  lo <= A x <= hi,  l <= x <= u`` is put in the
computational form ``[A  -I] z = 0`` with one logical variable per row, so
every variable (structural or logical) just carries a box. The basis is held
as a sparse LU factorization plus a product-form eta file that is refreshed
every ``REFACTOR_EVERY`` pivots.

Phase 1 is the composite "minimize the sum of infeasibilities" method; it
starts from any basis, which is what makes warm starts after bound changes
(branch-and-bound) work without a dual simplex.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..formulation.model import MilpModel

log = logging.getLogger(__name__)

PRIMAL_TOL = 1e-7
DUAL_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
BLAND_AFTER = 1000  # consecutive degenerate pivots before switching to Bland's rule

AT_LOWER, AT_UPPER, FREE, BASIC = 0, 1, 2, 3


class LpNumericalError(RuntimeError):
    """The simplex could not produce a trustworthy answer."""


@dataclass(frozen=True)
class Basis:
    basic: tuple[int, ...]
    status: bytes  # per z-variable state, see AT_LOWER ... BASIC

    @property
    def key(self) -> int:
        return hash((self.basic, self.status))


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: Optional[np.ndarray]
    objective: float
    basis: Optional[Basis] = None
    duals: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def basis_id(self) -> Optional[int]:
        return None if self.basis is None else self.basis.key


def _geometric_scaling(A: sp.csr_matrix, passes: int = 4):
    """Row and column factors (powers of two) from geometric-mean scaling."""
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    if A.nnz == 0:
        return r, s
    M = abs(A).tocsr()
    for _ in range(passes):
        S = sp.diags(r) @ M @ sp.diags(s)
        S = S.tocsr()
        rmax = S.max(axis=1).toarray().ravel()
        rmin = _rowmin(S)
        ok = rmax > 0
        r[ok] /= np.sqrt(rmax[ok] * rmin[ok])
        S = (sp.diags(r) @ M @ sp.diags(s)).tocsc()
        cmax = S.max(axis=0).toarray().ravel()
        cmin = _rowmin(S.T.tocsr())
        ok = cmax > 0
        s[ok] /= np.sqrt(cmax[ok] * cmin[ok])
    r = 2.0 ** np.round(np.log2(r))
    s = 2.0 ** np.round(np.log2(s))
    return r, s


def _rowmin(S: sp.csr_matrix) -> np.ndarray:
    out = np.ones(S.shape[0])
    data, ptr = S.data, S.indptr
    nz = np.diff(ptr) > 0
    if data.size:
        mins = np.minimum.reduceat(np.where(data > 0, data, np.inf), ptr[:-1][nz])
        out[nz] = mins
    return out


class SimplexLP:
    """A prepared LP (scaled, computational form) that can be re-solved with
    different variable bounds and an optional warm-start basis."""

    def __init__(self, model: MilpModel, scale: bool = True):
        self.model = model
        A = model.A.tocsr().astype(float)
        self.m, self.n = A.shape
        if scale:
            self.rs, self.cs = _geometric_scaling(A)
        else:
            self.rs, self.cs = np.ones(self.m), np.ones(self.n)
        As = (sp.diags(self.rs) @ A @ sp.diags(self.cs)).tocsc()
        self.A = As
        self.AT = As.T.tocsr()  # rows are columns of the scaled A
        self.cost = np.concatenate([model.c * self.cs, np.zeros(self.m)])
        lo, hi = model.row_bounds()
        self.row_lo = lo * self.rs
        self.row_hi = hi * self.rs

    # -- column access -------------------------------------------------
    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        if j < self.n:
            a, b = self.A.indptr[j], self.A.indptr[j + 1]
            col[self.A.indices[a:b]] = self.A.data[a:b]
        else:
            col[j - self.n] = -1.0
        return col

    def _basis_matrix(self, basic: np.ndarray) -> sp.csc_matrix:
        ptr = [0]
        idx: list[np.ndarray] = []
        dat: list[np.ndarray] = []
        Ap, Ai, Ad = self.A.indptr, self.A.indices, self.A.data
        for j in basic:
            if j < self.n:
                a, b = Ap[j], Ap[j + 1]
                idx.append(Ai[a:b])
                dat.append(Ad[a:b])
                ptr.append(ptr[-1] + b - a)
            else:
                idx.append(np.array([j - self.n]))
                dat.append(np.array([-1.0]))
                ptr.append(ptr[-1] + 1)
        return sp.csc_matrix(
            (np.concatenate(dat) if dat else np.zeros(0),
             np.concatenate(idx) if idx else np.zeros(0, dtype=int), np.array(ptr)),
            shape=(self.m, self.m))

    # -- main entry ----------------------------------------------------
    def solve(self, lb: Optional[np.ndarray] = None, ub: Optional[np.ndarray] = None,
              basis: Optional[Basis] = None, max_iter: Optional[int] = None) -> LpSolution:
        model = self.model
        lb = model.lb if lb is None else lb
        ub = model.ub if ub is None else ub
        n, m = self.n, self.m
        if np.any(lb > ub + 1e-12):
            return LpSolution("infeasible", None, np.inf)
        l = np.concatenate([lb / self.cs, self.row_lo])
        u = np.concatenate([ub / self.cs, self.row_hi])
        if m == 0:
            return self._solve_unconstrained(l, u)
        return _Run(self, l, u, basis, max_iter or 50 * (n + m) + 1000).run()

    def _solve_unconstrained(self, l, u) -> LpSolution:
        c = self.cost[: self.n]
        x = np.zeros(self.n)
        for j in range(self.n):
            if c[j] > 0:
                x[j] = l[j]
            elif c[j] < 0:
                x[j] = u[j]
            else:
                x[j] = l[j] if np.isfinite(l[j]) else (u[j] if np.isfinite(u[j]) else 0.0)
            if not np.isfinite(x[j]):
                return LpSolution("unbounded", None, -np.inf)
        xo = x * self.cs
        return LpSolution("optimal", xo, self.model.objective(xo), None, np.zeros(0), 0)


class _Run:
    """State of one simplex solve."""

    def __init__(self, lp: SimplexLP, l, u, basis: Optional[Basis], max_iter: int):
        self.lp = lp
        self.l, self.u = l, u
        self.max_iter = max_iter
        n, m = lp.n, lp.m
        self.N = n + m
        self.status = np.empty(self.N, dtype=np.int8)
        if basis is not None and len(basis.basic) == m and len(basis.status) == self.N:
            self.basic = np.array(basis.basic, dtype=int)
            self.status[:] = np.frombuffer(basis.status, dtype=np.int8)
        else:
            self._slack_basis()
        self.x = np.zeros(self.N)
        self._place_nonbasic()
        self.iterations = 0
        self.degenerate = 0

    def _slack_basis(self):
        n, m = self.lp.n, self.lp.m
        self.basic = np.arange(n, n + m)
        self.status[:] = AT_LOWER
        self.status[self.basic] = BASIC

    def _place_nonbasic(self):
        l, u, st = self.l, self.u, self.status
        nb = st != BASIC
        fl, fu = np.isfinite(l), np.isfinite(u)
        # repair states that point at an infinite bound
        bad_lo = nb & (st == AT_LOWER) & ~fl
        st[bad_lo & fu] = AT_UPPER
        st[bad_lo & ~fu] = FREE
        bad_hi = nb & (st == AT_UPPER) & ~fu
        st[bad_hi & fl] = AT_LOWER
        st[bad_hi & ~fl] = FREE
        free_fix = nb & (st == FREE) & fl
        st[free_fix] = AT_LOWER
        free_fix = nb & (st == FREE) & fu
        st[free_fix] = AT_UPPER
        self.x[nb & (st == AT_LOWER)] = l[nb & (st == AT_LOWER)]
        self.x[nb & (st == AT_UPPER)] = u[nb & (st == AT_UPPER)]
        self.x[nb & (st == FREE)] = 0.0

    # -- factorization -------------------------------------------------
    def _factor(self):
        B = self.lp._basis_matrix(self.basic)
        try:
            self.lu = spla.splu(B, permc_spec="COLAMD")
            # cheap singularity probe
            if not np.all(np.isfinite(self.lu.U.diagonal())) or np.min(np.abs(self.lu.U.diagonal())) < 1e-11:
                raise RuntimeError("near-singular basis")
        except RuntimeError:
            log.debug("basis singular, falling back to slack basis")
            self._slack_basis()
            self._place_nonbasic()
            self.lu = spla.splu(self.lp._basis_matrix(self.basic), permc_spec="COLAMD")
        self.etas: list[tuple[int, np.ndarray]] = []
        self._recompute_xb()

    def _recompute_xb(self):
        lp = self.lp
        z = self.x.copy()
        z[self.basic] = 0.0
        rhs = -(lp.A @ z[: lp.n] - z[lp.n:])
        self.x[self.basic] = self.ftran(rhs)

    def ftran(self, a: np.ndarray) -> np.ndarray:
        v = self.lu.solve(a)
        for r, eta in self.etas:
            vr = v[r]
            if vr != 0.0:
                v += eta * vr
                v[r] = eta[r] * vr
        return v

    def btran(self, c: np.ndarray) -> np.ndarray:
        w = c.copy()
        for r, eta in reversed(self.etas):
            w[r] = eta @ w
        return self.lu.solve(w, trans="T")

    # -- iteration -----------------------------------------------------
    def run(self) -> LpSolution:
        lp = self.lp
        self._factor()
        rechecks = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise LpNumericalError(f"simplex iteration limit {self.max_iter} reached "
                                       f"(m={lp.m}, n={lp.n})")
            xb = self.x[self.basic]
            lb, ub = self.l[self.basic], self.u[self.basic]
            below = xb < lb - PRIMAL_TOL
            above = xb > ub + PRIMAL_TOL
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            else:
                cb = lp.cost[self.basic]
            y = self.btran(cb)
            d = np.empty(self.N)
            if phase1:
                d[: lp.n] = -(lp.AT @ y)
            else:
                d[: lp.n] = lp.cost[: lp.n] - lp.AT @ y
            d[lp.n:] = y
            st = self.status
            fixed = self.l == self.u
            elig = np.zeros(self.N, dtype=bool)
            elig |= (st == AT_LOWER) & (d < -DUAL_TOL)
            elig |= (st == AT_UPPER) & (d > DUAL_TOL)
            elig |= (st == FREE) & (np.abs(d) > DUAL_TOL)
            elig &= ~fixed
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                if phase1:
                    infeas = float(np.sum(np.maximum(lb - xb, 0) + np.maximum(xb - ub, 0)))
                    if rechecks < 2 and self.etas:
                        rechecks += 1
                        self._factor()
                        continue
                    return LpSolution("infeasible", None, np.inf, self._basis(), None, self.iterations)
                # optimal for the current factorization: verify on a fresh one
                if self.etas and rechecks < 3:
                    rechecks += 1
                    self._factor()
                    continue
                return self._finish(y)
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.ftran(lp._column(q))
            delta = -direction * alpha
            r, theta = self._ratio_test(delta, xb, lb, ub, phase1, bland)
            flip = self.u[q] - self.l[q]
            if np.isfinite(flip) and (r < 0 or flip <= theta):
                # bound flip, basis unchanged
                self.x[q] = self.u[q] if direction > 0 else self.l[q]
                st[q] = AT_UPPER if direction > 0 else AT_LOWER
                self.x[self.basic] = xb + flip * delta
                self.iterations += 1
                self.degenerate = 0
                continue
            if r < 0:
                if phase1:
                    self._factor()
                    self.iterations += 1
                    continue
                return LpSolution("unbounded", None, -np.inf, self._basis(), None, self.iterations)
            if abs(alpha[r]) < PIVOT_TOL:
                # tiny pivot: refresh and retry once
                if self.etas:
                    self._factor()
                    self.iterations += 1
                    continue
            self.iterations += 1
            if theta <= 1e-12:
                self.degenerate += 1
                if self.degenerate >= BLAND_AFTER:
                    bland = True
            else:
                self.degenerate = 0
                bland = False
            leaving = int(self.basic[r])
            self.x[self.basic] = xb + theta * delta
            self.x[q] += direction * theta
            # leaving variable goes to the bound it hit
            if delta[r] < 0:
                if above[r]:
                    self.x[leaving], st[leaving] = self.u[leaving], AT_UPPER
                else:
                    self.x[leaving], st[leaving] = self.l[leaving], AT_LOWER
            else:
                if below[r]:
                    self.x[leaving], st[leaving] = self.l[leaving], AT_LOWER
                else:
                    self.x[leaving], st[leaving] = self.u[leaving], AT_UPPER
            if not np.isfinite(self.x[leaving]):
                st[leaving] = FREE
                self.x[leaving] = 0.0
            self.basic[r] = q
            st[q] = BASIC
            eta = -alpha / alpha[r]
            eta[r] = 1.0 / alpha[r]
            self.etas.append((r, eta))
            if len(self.etas) >= REFACTOR_EVERY:
                self._factor()

    def _ratio_test(self, delta, xb, lb, ub, phase1, bland):
        """Harris two-pass ratio test. Returns (row, step) or (-1, inf)."""
        big = np.abs(delta) > PIVOT_TOL
        down = big & (delta < 0)
        up = big & (delta > 0)
        target = np.full(delta.shape, np.nan)
        if phase1:
            below = xb < lb - PRIMAL_TOL
            above = xb > ub + PRIMAL_TOL
            feas = ~below & ~above
            # moving down: feasible ones stop at l, ones above stop at u
            target[down & feas] = lb[down & feas]
            target[down & above] = ub[down & above]
            target[up & feas] = ub[up & feas]
            target[up & below] = lb[up & below]
        else:
            target[down] = lb[down]
            target[up] = ub[up]
        has = np.isfinite(target)
        if not has.any():
            return -1, np.inf
        idx = np.flatnonzero(has)
        dl = delta[idx]
        gap = target[idx] - xb[idx]
        relaxed = (gap + np.sign(dl) * PRIMAL_TOL) / dl
        theta_max = max(float(relaxed.min()), 0.0)
        exact = np.maximum(gap / dl, 0.0)
        ok = exact <= theta_max
        if bland:
            choose = idx[ok]
            # smallest basic variable index among ties
            pick = int(choose[np.argmin(self.basic[choose])])
        else:
            cands = np.flatnonzero(ok)
            pick = int(idx[cands[np.argmax(np.abs(dl[cands]))]])
        theta = max((target[pick] - xb[pick]) / delta[pick], 0.0)
        return pick, float(theta)

    def _basis(self) -> Basis:
        return Basis(tuple(int(j) for j in self.basic), self.status.astype(np.int8).tobytes())

    def _finish(self, y) -> LpSolution:
        lp = self.lp
        x = self.x[: lp.n] * lp.cs
        # the model rows are checked in unscaled space
        model = lp.model
        viol = model.violations(x)
        scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
        if viol["rows"] > 1e-6 * scale or viol["bounds"] > 1e-6 * scale:
            raise LpNumericalError(
                f"primal residual {max(viol['rows'], viol['bounds']):.3g} after refactorization; "
                f"basis condition ~{_condest(self.lu):.3g}")
        duals = y * lp.rs
        return LpSolution("optimal", x, model.objective(x), self._basis(), duals, self.iterations)


def _condest(lu) -> float:
    d = np.abs(lu.U.diagonal())
    return float(d.max() / max(d.min(), 1e-300))


def _solve_highs(model: MilpModel, lb, ub) -> LpSolution:
    from scipy.optimize import linprog

    A = model.A.tocsr()
    le, ge, eq = model.sense == "L", model.sense == "G", model.sense == "E"
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr()
    b_ub = np.concatenate([model.rhs[le], -model.rhs[ge]])
    bounds = np.column_stack([np.where(np.isfinite(lb), lb, -np.inf), np.where(np.isfinite(ub), ub, np.inf)])
    res = linprog(model.c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=model.rhs[eq] if eq.any() else None,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return LpSolution("infeasible", None, np.inf)
    if res.status == 3:
        return LpSolution("unbounded", None, -np.inf)
    if res.status != 0:
        raise LpNumericalError(f"HiGHS: {res.message}")
    duals = np.zeros(model.n_rows)
    if le.any() or ge.any():
        mu = res.ineqlin.marginals
        duals[le] = mu[: le.sum()]
        duals[ge] = -mu[le.sum():]
    if eq.any():
        duals[eq] = res.eqlin.marginals
    return LpSolution("optimal", res.x, model.objective(res.x), None, duals, int(res.nit))


def solve_lp(model: MilpModel, basis: Optional[Basis] = None, *, lb=None, ub=None,
             method: str = "simplex", scale: bool = True) -> LpSolution:
    """Solve the continuous relaxation of ``model``.

    ``method="simplex"`` uses the in-house bounded revised simplex;
    ``method="highs"`` delegates to scipy's HiGHS (no basis is returned).
    """
    if model.n_vars == 0:
        raise ValueError("model has no variables")
    lb = model.lb if lb is None else np.asarray(lb, dtype=float)
    ub = model.ub if ub is None else np.asarray(ub, dtype=float)
    if method == "highs":
        return _solve_highs(model, lb, ub)
    if method != "simplex":
        raise ValueError(f"unknown LP method {method!r}")
    return SimplexLP(model, scale=scale).solve(lb, ub, basis)
