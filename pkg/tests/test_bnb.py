import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridplan.formulation.model import MilpModel
from gridplan.solver.bnb import SolverOptions, gaps, solve_milp
from gridplan.solver.lp import solve_lp

from instances import enumerate_milp, random_lp, random_milp

EXACT = SolverOptions(opt_ca=0.0, opt_cr=0.0)


def _knapsack() -> MilpModel:
    return MilpModel.from_arrays([-3.0, -2.0], [[1.0, 1.0]], "L", [1.0], ub=[1.0, 1.0], binary=[True, True])


def test_two_binary_example():
    r = solve_milp(_knapsack(), EXACT)
    assert r.status == "optimal_within_gap"
    np.testing.assert_array_equal(r.x, [1.0, 0.0])
    assert r.objective == -3.0


def test_continuous_model_is_one_node():
    m = random_lp(np.random.default_rng(3), 12, 6)
    r = solve_milp(m, SolverOptions(presolve=False))
    lp = solve_lp(m)
    assert r.nodes == 1
    assert r.objective == pytest.approx(lp.objective, rel=1e-9, abs=1e-9)


def test_infeasible_model():
    m = MilpModel.from_arrays([1.0, 1.0], [[1.0, 1.0]], "E", [1.5], ub=[1, 1], binary=[True, True])
    r = solve_milp(m, EXACT)
    assert r.status == "infeasible"
    assert not r.has_incumbent


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("branching,selection", [("most_fractional", "best_bound"),
                                                 ("pseudo_cost", "depth_first")])
def test_against_enumeration(seed, branching, selection):
    rng = np.random.default_rng(seed)
    m = random_milp(rng, int(rng.integers(1, 8)), int(rng.integers(0, 8)), int(rng.integers(1, 6)))
    ref, _ = enumerate_milp(m)
    r = solve_milp(m, SolverOptions(opt_ca=0.0, opt_cr=0.0, branching=branching, node_selection=selection))
    if math.isinf(ref):
        assert r.status == "infeasible"
    else:
        assert abs(r.objective - ref) <= 1e-6 * max(1.0, abs(ref))


def test_deterministic_single_thread():
    m = random_milp(np.random.default_rng(11), 10, 6, 5)
    a = solve_milp(m, SolverOptions(opt_ca=0, opt_cr=0, seed=4))
    b = solve_milp(m, SolverOptions(opt_ca=0, opt_cr=0, seed=4))
    np.testing.assert_array_equal(a.x, b.x)
    assert a.nodes == b.nodes
    assert [(e.node, e.bound, e.incumbent) for e in a.node_log] == [(e.node, e.bound, e.incumbent)
                                                                      for e in b.node_log]


def test_threads_reach_the_same_optimum():
    m = random_milp(np.random.default_rng(12), 10, 5, 5)
    a = solve_milp(m, EXACT)
    b = solve_milp(m, SolverOptions(opt_ca=0, opt_cr=0, threads=3))
    assert b.objective == pytest.approx(a.objective, rel=1e-9, abs=1e-9)


def test_highs_backend():
    m = random_milp(np.random.default_rng(13), 8, 6, 4)
    a = solve_milp(m, EXACT)
    b = solve_milp(m, SolverOptions(opt_ca=0, opt_cr=0, lp_method="highs"))
    assert b.objective == pytest.approx(a.objective, rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("kw", [{"opt_ca": -1.0}, {"threads": 0}, {"branching": "strong"},
                                {"node_selection": "breadth"}, {"lp_method": "ipm"}, {"time_limit": 0.0}])
def test_option_validation(kw):
    with pytest.raises(ValueError):
        SolverOptions(**kw)


def test_binary_bounds_checked():
    m = MilpModel.from_arrays([1.0], None, [], [], ub=[2.0], binary=[True])
    with pytest.raises(ValueError, match="bounds"):
        solve_milp(m)


def test_node_limit():
    m = random_milp(np.random.default_rng(21), 12, 4, 6)
    r = solve_milp(m, SolverOptions(opt_ca=0, opt_cr=0, node_limit=2, presolve=False))
    assert r.status in ("limit_reached", "optimal_within_gap")
    if r.status == "limit_reached":
        assert r.nodes >= 2


def test_gap_helper():
    assert gaps(10.0, 9.0) == (1.0, 0.1)
    assert gaps(math.inf, 0.0) == (math.inf, math.inf)
    assert gaps(5.0, 6.0)[0] == 0.0


@settings(max_examples=25)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.0, 1e-3, 1e-2, 0.2]))
def test_result_invariants(seed, gap):
    rng = np.random.default_rng(seed)
    m = random_milp(rng, int(rng.integers(1, 9)), int(rng.integers(0, 6)), int(rng.integers(1, 5)))
    r = solve_milp(m, SolverOptions(opt_ca=gap, opt_cr=gap))
    if not r.has_incumbent:
        assert r.status in ("infeasible", "limit_reached")
        return
    assert r.objective >= r.bound - 1e-9 * max(1.0, abs(r.objective))
    if r.status == "optimal_within_gap":
        assert r.abs_gap <= gap + 1e-12 or r.rel_gap <= gap + 1e-12
    # incumbent history improves and the logged bound never decreases
    objs = [o for _, o in r.incumbent_history]
    assert all(b < a for a, b in zip(objs, objs[1:]))
    bounds = [e.bound for e in r.node_log if math.isfinite(e.bound)]
    assert all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(bounds, bounds[1:]))
    ref, _ = enumerate_milp(m)
    assert r.objective <= ref + max(gap, gap * abs(ref)) + 1e-6 * max(1.0, abs(ref))
    assert r.objective >= ref - 1e-6 * max(1.0, abs(ref))


@pytest.mark.parametrize("seed", range(8))
def test_plunging_keeps_the_optimum(seed):
    m = random_milp(np.random.default_rng(300 + seed), 9, 4, 6)
    ref, _ = enumerate_milp(m)
    r = solve_milp(m, SolverOptions(opt_ca=0, opt_cr=0, plunge=False))
    p = solve_milp(m, EXACT)
    if math.isinf(ref):
        assert r.status == p.status == "infeasible"
    else:
        assert abs(r.objective - ref) <= 1e-6 * max(1.0, abs(ref))
        assert abs(p.objective - ref) <= 1e-6 * max(1.0, abs(ref))
