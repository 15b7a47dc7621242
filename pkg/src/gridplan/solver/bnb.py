"""LP-based branch-and-bound for models with binary variables.

Termination follows the usual optCA/optCR convention: stop as soon as
``incumbent - bound <= opt_ca`` or ``(incumbent - bound) / max(1e-9, |incumbent|) <= opt_cr``.

With ``threads > 1`` the open node pool is drained in batches; node LPs of a
batch are solved concurrently and their results are merged in the main
thread in batch order, so the incumbent and node pool only ever change in
one place.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..formulation.model import MilpModel
from .lp import Basis, LpNumericalError, LpSolution, SimplexLP, solve_lp
from .presolve import PresolveInfeasible, PresolveMap, presolve

log = logging.getLogger(__name__)

INT_TOL = 1e-6
REPORT_FEAS_TOL = 1e-6


class SolverError(RuntimeError):
    pass


@dataclass
class SolverOptions:
    opt_ca: float = 1e-2
    opt_cr: float = 1e-2
    time_limit: float = 3600.0
    node_limit: int = 1_000_000
    branching: str = "most_fractional"  # or "pseudo_cost"
    node_selection: str = "best_bound"  # or "depth_first"
    plunge: bool = True  # best_bound: search depth-first until the first incumbent
    threads: int = 1
    seed: int = 0
    presolve: bool = True
    lp_method: str = "simplex"  # or "highs"

    def __post_init__(self):
        if self.opt_ca < 0 or self.opt_cr < 0:
            raise ValueError("opt_ca and opt_cr must be nonnegative")
        if self.time_limit <= 0 or self.node_limit <= 0 or self.threads <= 0:
            raise ValueError("limits and thread count must be positive")
        if self.branching not in ("most_fractional", "pseudo_cost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_selection not in ("best_bound", "depth_first"):
            raise ValueError(f"unknown node selection {self.node_selection!r}")
        if self.lp_method not in ("simplex", "highs"):
            raise ValueError(f"unknown LP method {self.lp_method!r}")


@dataclass
class NodeLogEntry:
    node: int
    depth: int
    bound: float
    incumbent: float
    gap: float
    time: float


@dataclass
class MilpResult:
    status: str  # optimal_within_gap | feasible | infeasible | limit_reached
    x: Optional[np.ndarray]
    objective: float
    bound: float
    abs_gap: float
    rel_gap: float
    nodes: int
    wall_time: float
    root_bound: float = math.nan
    node_log: list[NodeLogEntry] = field(default_factory=list)
    incumbent_history: list[tuple[int, float]] = field(default_factory=list)
    failed_nodes: int = 0

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    @property
    def gap(self) -> float:
        return self.rel_gap


def gaps(incumbent: float, bound: float) -> tuple[float, float]:
    if not math.isfinite(incumbent):
        return math.inf, math.inf
    a = max(incumbent - bound, 0.0)
    return a, a / max(1e-9, abs(incumbent))


@dataclass
class _Node:
    id: int
    depth: int
    bound: float
    lb: np.ndarray
    ub: np.ndarray
    basis: Optional[Basis]
    branch: Optional[tuple[int, int, float, float]] = None  # (var, dir, frac, parent_obj)


class _LpBackend:
    def __init__(self, model: MilpModel, method: str):
        self.model = model
        self.method = method
        self.simplex = SimplexLP(model) if method == "simplex" else None

    def solve(self, lb, ub, basis=None) -> LpSolution:
        if self.simplex is not None:
            try:
                return self.simplex.solve(lb, ub, basis)
            except LpNumericalError:
                if basis is None:
                    raise
                return self.simplex.solve(lb, ub, None)
        return solve_lp(self.model, lb=lb, ub=ub, method="highs")


class BranchAndBound:
    def __init__(self, model: MilpModel, opts: SolverOptions,
                 on_node: Optional[Callable[[NodeLogEntry], None]] = None):
        self.full = model
        self.opts = opts
        self.on_node = on_node
        self.rng = np.random.default_rng(opts.seed)

    # -- helpers -------------------------------------------------------
    def _fractional(self, x: np.ndarray, lb, ub) -> np.ndarray:
        b = self.binary_idx
        free = lb[b] < ub[b]
        f = np.abs(x[b] - np.round(x[b]))
        return b[free & (f > INT_TOL)]

    def _choose(self, x: np.ndarray, cand: np.ndarray) -> int:
        f = x[cand] - np.floor(x[cand])
        if self.opts.branching == "pseudo_cost":
            down = np.array([self._pc(j, 0) for j in cand])
            up = np.array([self._pc(j, 1) for j in cand])
            score = np.maximum(f * down, 1e-6) * np.maximum((1 - f) * up, 1e-6)
        else:
            score = np.minimum(f, 1 - f)
        return int(cand[int(np.argmax(score))])

    def _pc(self, j: int, d: int) -> float:
        s, c = self.pc_sum[d].get(j, 0.0), self.pc_cnt[d].get(j, 0)
        if c:
            return s / c
        # uninitialised: average over known ones, else 1
        tot = sum(self.pc_sum[d].values())
        cnt = sum(self.pc_cnt[d].values())
        return tot / cnt if cnt else 1.0

    def _may_improve(self, bound: float) -> bool:
        if not math.isfinite(self.inc_obj):
            return True
        return bound < self.inc_obj - 1e-12 * max(1.0, abs(self.inc_obj))

    def _polish(self, x, lb, ub, basis) -> Optional[np.ndarray]:
        """Fix binaries at their rounded values and re-solve the continuous part."""
        b = self.binary_idx
        l2, u2 = lb.copy(), ub.copy()
        r = np.clip(np.round(x[b]), lb[b], ub[b])
        l2[b] = r
        u2[b] = r
        sol = self.lp.solve(l2, u2, basis)
        if sol.status != "optimal":
            return None
        xs = sol.x.copy()
        xs[b] = r
        xs = np.clip(xs, l2, u2)
        return xs

    def _accept(self, x_red: np.ndarray) -> bool:
        x = self.pmap.expand(x_red) if self.pmap else x_red
        x = np.clip(x, self.full.lb, self.full.ub)
        viol = _scaled_row_violation(self.full, x)
        if viol > REPORT_FEAS_TOL:
            log.debug("rejecting candidate incumbent, scaled violation %.3g", viol)
            return False
        obj = self.full.objective(x)
        if obj < self.inc_obj:
            self.inc_obj = obj
            self.inc_x = x
            self.inc_hist.append((self.nodes, obj))
            return True
        return False

    # -- main loop -----------------------------------------------------
    def run(self) -> MilpResult:
        opts = self.opts
        t0 = time.perf_counter()
        self.inc_obj, self.inc_x, self.inc_hist = math.inf, None, []
        self.nodes = 0
        self.pc_sum = ({}, {})
        self.pc_cnt = ({}, {})
        log_entries: list[NodeLogEntry] = []

        def result(status, bound, failed=0, root=math.nan):
            if self.inc_x is not None:
                bound = min(bound, self.inc_obj)
            a, r = gaps(self.inc_obj, bound)
            return MilpResult(status, self.inc_x, self.inc_obj, bound, a, r, self.nodes,
                              time.perf_counter() - t0, root, log_entries, self.inc_hist, failed)

        if opts.presolve:
            try:
                model, self.pmap = presolve(self.full)
            except PresolveInfeasible as e:
                log.info("presolve: %s", e)
                return result("infeasible", math.inf)
        else:
            model, self.pmap = self.full, None
        self.model = model
        self.binary_idx = np.flatnonzero(model.binary)
        if model.n_vars == 0:
            self._accept(np.zeros(0))
            status = "optimal_within_gap" if self.inc_x is not None else "infeasible"
            return result(status, self.inc_obj)
        self.lp = _LpBackend(model, opts.lp_method)

        root_sol = self.lp.solve(model.lb, model.ub)
        self.nodes = 1
        if root_sol.status == "infeasible":
            return result("infeasible", math.inf)
        if root_sol.status == "unbounded":
            raise SolverError("LP relaxation is unbounded")
        root_bound = root_sol.objective

        # rounding heuristic on the root relaxation
        self._root_rounding(root_sol, model)

        seq = itertools.count()
        open_heap: list = []  # best-bound order
        stack: list[_Node] = []  # depth-first order
        bound_heap: list = []  # (bound, id) with lazy deletion, for the global bound
        closed: set[int] = set()
        failed_bounds: list[float] = []
        dive: list[_Node] = []  # depth-first stack used before the first incumbent; nodes also sit in open_heap

        def plunge_into(kids: list[_Node]) -> None:
            if kids and opts.plunge and opts.node_selection == "best_bound" and self.inc_x is None:
                dive.extend(sorted(kids, key=_rounding_side_last, reverse=True))

        def push(node: _Node):
            heapq.heappush(bound_heap, (node.bound, node.id))
            if opts.node_selection == "best_bound":
                heapq.heappush(open_heap, (node.bound, -node.depth, node.id, node))
            else:
                stack.append(node)

        def global_bound() -> float:
            while bound_heap and bound_heap[0][1] in closed:
                heapq.heappop(bound_heap)
            b = bound_heap[0][0] if bound_heap else math.inf
            if failed_bounds:
                b = min(b, min(failed_bounds))
            return b

        root = _Node(next(seq), 0, root_bound, model.lb.copy(), model.ub.copy(), None)
        children = self._expand(root, root_sol, seq)
        for ch in children:
            push(ch)
        plunge_into(children)
        self._log(log_entries, root, global_bound() if children else self.inc_obj, t0)

        pool = ThreadPoolExecutor(opts.threads) if opts.threads > 1 else None
        try:
            while True:
                bound = global_bound()
                if self.inc_x is not None:
                    a, r = gaps(self.inc_obj, bound)
                    if a <= opts.opt_ca or r <= opts.opt_cr:
                        return result("optimal_within_gap", bound, len(failed_bounds), root_bound)
                if not open_heap and not stack:
                    if self.inc_x is None:
                        return result("infeasible", math.inf, len(failed_bounds), root_bound)
                    return result("feasible", bound, len(failed_bounds), root_bound)
                if self.nodes >= opts.node_limit or time.perf_counter() - t0 > opts.time_limit:
                    return result("limit_reached", bound, len(failed_bounds), root_bound)

                batch: list[_Node] = []
                while len(batch) < opts.threads and (open_heap or stack):
                    if dive and self.inc_x is None:
                        node = dive.pop()
                    else:
                        node = heapq.heappop(open_heap)[3] if open_heap else stack.pop()
                    if node.id in closed:
                        continue
                    if not self._may_improve(node.bound):
                        closed.add(node.id)
                        continue
                    batch.append(node)
                if not batch:
                    continue
                if pool is not None:
                    sols = list(pool.map(self._solve_node, batch))
                else:
                    sols = [self._solve_node(nd) for nd in batch]
                for node, sol in zip(batch, sols):
                    self.nodes += 1
                    closed.add(node.id)
                    if sol is None:
                        failed_bounds.append(node.bound)
                        continue
                    if sol.status != "optimal":
                        self._log(log_entries, node, global_bound(), t0)
                        continue
                    sol_obj = max(sol.objective, node.bound)
                    if node.branch is not None:
                        j, d, f, pobj = node.branch
                        gain = max(sol_obj - pobj, 0.0) / max(f if d == 0 else 1 - f, 1e-6)
                        self.pc_sum[d][j] = self.pc_sum[d].get(j, 0.0) + gain
                        self.pc_cnt[d][j] = self.pc_cnt[d].get(j, 0) + 1
                    node.bound = sol_obj
                    kids = self._expand(node, sol, seq) if self._may_improve(sol_obj) else []
                    for ch in kids:
                        push(ch)
                    plunge_into(kids)
                    self._log(log_entries, node, global_bound(), t0)
        finally:
            if pool is not None:
                pool.shutdown()

    def _solve_node(self, node: _Node) -> Optional[LpSolution]:
        try:
            return self.lp.solve(node.lb, node.ub, node.basis)
        except LpNumericalError as e:
            log.warning("node %d: LP numerical failure: %s", node.id, e)
            return None

    def _expand(self, node: _Node, sol: LpSolution, seq) -> list[_Node]:
        x = sol.x
        cand = self._fractional(x, node.lb, node.ub)
        if cand.size == 0:
            xs = self._polish(x, node.lb, node.ub, sol.basis)
            if xs is not None and self._accept(xs):
                return []
            if xs is not None:
                return []
            # rounded point infeasible: branch on the least integral binary anyway
            b = self.binary_idx
            free = b[node.lb[b] < node.ub[b]]
            if free.size == 0:
                return []
            f = np.abs(x[free] - np.round(x[free]))
            cand = free[[int(np.argmax(f))]]
        j = self._choose(x, cand)
        frac = float(x[j] - math.floor(x[j]))
        kids = []
        for d in (0, 1):
            lb, ub = node.lb.copy(), node.ub.copy()
            if d == 0:
                ub[j] = 0.0
            else:
                lb[j] = 1.0
            kids.append(_Node(next(seq), node.depth + 1, sol.objective, lb, ub, sol.basis,
                              (j, d, frac, sol.objective)))
        if self.opts.node_selection == "depth_first":
            # push the less promising child first so the rounding direction is explored first
            if frac >= 0.5:
                kids = [kids[0], kids[1]]
            else:
                kids = [kids[1], kids[0]]
        return kids

    def _root_rounding(self, sol: LpSolution, model: MilpModel) -> None:
        x = sol.x
        b = self.binary_idx
        if b.size == 0:
            self._accept(x)
            return
        variants = [np.round(x[b]), np.where(x[b] > INT_TOL, 1.0, 0.0)]
        for r in variants:
            lb, ub = model.lb.copy(), model.ub.copy()
            r = np.clip(r, lb[b], ub[b])
            lb[b] = r
            ub[b] = r
            try:
                s = self.lp.solve(lb, ub, sol.basis)
            except LpNumericalError:
                continue
            if s.status == "optimal":
                xs = np.clip(s.x, lb, ub)
                xs[b] = r
                self._accept(xs)

    def _log(self, entries, node: _Node, bound: float, t0: float) -> None:
        bound = min(bound, self.inc_obj) if self.inc_x is not None else bound
        _, r = gaps(self.inc_obj, bound)
        e = NodeLogEntry(node.id, node.depth, bound, self.inc_obj, r, time.perf_counter() - t0)
        entries.append(e)
        if self.on_node is not None:
            self.on_node(e)


def _rounding_side_last(node: _Node) -> int:
    """0 for the child on the side the branching value rounds to."""
    _, d, frac, _ = node.branch
    return 0 if d == (1 if frac >= 0.5 else 0) else 1


def _scaled_row_violation(model: MilpModel, x: np.ndarray) -> float:
    """Largest row violation divided by max(1, |rhs|, largest |a_ij x_j| in the row)."""
    A = model.A.tocsr()
    ax = A @ x
    lo, hi = model.row_bounds()
    v = np.maximum(lo - ax, ax - hi)
    v = np.maximum(v, 0.0)
    if v.size == 0:
        return 0.0
    mag = abs(A).multiply(np.abs(x)[None, :]).tocsr().max(axis=1).toarray().ravel()
    scale = np.maximum(1.0, np.maximum(np.abs(model.rhs), mag))
    return float(np.max(v / scale))


def solve_milp(model: MilpModel, opts: Optional[SolverOptions] = None,
               on_node: Optional[Callable[[NodeLogEntry], None]] = None) -> MilpResult:
    """Branch-and-bound over LP relaxations; see :class:`SolverOptions`."""
    opts = opts or SolverOptions()
    bad = model.binary & ((model.lb < 0) | (model.ub > 1))
    if bad.any():
        raise ValueError(f"binary variable {model.names[int(np.flatnonzero(bad)[0])]} has bounds outside [0,1]")
    return BranchAndBound(model, opts, on_node).run()
