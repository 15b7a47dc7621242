import math

import pytest
from hypothesis import given, settings, strategies as st

from gridplan.formulation.build import build_model
from gridplan.formulation.feasibility import check_feasibility
from gridplan.formulation.solution import extract_solution
from gridplan.solver.bnb import SolverOptions, solve_milp
from gridplan.solver.lp import solve_lp

from instances import emission_toy, generator, ledger_cost, toy_catalog, toy_planning

EXACT = SolverOptions(opt_ca=0.0, opt_cr=0.0)
demands = st.lists(st.floats(0.0, 2800.0, allow_subnormal=False), min_size=4, max_size=4)


def _solve(cat, s, cfg):
    m = build_model(cat, s, cfg)
    r = solve_milp(m, EXACT)
    return m, r


@settings(max_examples=25)
@given(demands, st.sampled_from([0.0, 0.12]))
def test_optimal_plans_are_feasible_and_priced_consistently(demand, inflation):
    cat, s, cfg = toy_planning(demand=demand)
    cfg = cfg.replace(inflation=inflation)
    m, r = _solve(cat, s, cfg)
    assert r.status == "optimal_within_gap"
    sol = extract_solution(m, r.x, cat, s, cfg, bound=r.bound, status=r.status)
    rep = check_feasibility(sol, cat, s, cfg)
    assert rep.ok, rep.lines()
    assert ledger_cost(sol, cat, s, cfg) == pytest.approx(r.objective, rel=1e-6, abs=1e-6)
    assert r.objective >= solve_lp(m).objective - 1e-6 * max(1.0, abs(r.objective))


@settings(max_examples=15)
@given(st.floats(0.0, 6e5), st.floats(0.0, 6e5))
def test_tighter_emission_cap_never_lowers_cost(l1, l2):
    lo, hi = sorted((l1, l2))
    tight = _solve(*emission_toy(lo))[1].objective
    loose = _solve(*emission_toy(hi))[1].objective
    assert tight >= loose - 1e-6 * loose


@settings(max_examples=15)
@given(demands)
def test_extra_option_never_raises_cost(demand):
    cat, s, cfg = toy_planning(demand=demand)
    base = _solve(cat, s, cfg)[1].objective
    more = toy_catalog(list(cat.equipment) + [generator("g2", 2.0)], cat.renewable_params)
    assert _solve(more, s, cfg)[1].objective <= base + 1e-6 * max(1.0, base)


@settings(max_examples=15)
@given(demands)
def test_reserve_follows_peak(demand):
    cat, s, cfg = toy_planning(demand=demand)
    m, r = _solve(cat, s, cfg)
    assert r.x[m.var("sp", "elect", 0, 0)] == pytest.approx(0.03 * max(demand))


def test_uncapped_emissions_match_no_cap_rows():
    cat, s, cfg = emission_toy(math.inf)
    assert "co2_cap" not in build_model(cat, s, cfg).row_index
