import json

import numpy as np
import pytest

from gridplan.formulation.build import build_model
from gridplan.formulation.solution import PlanSolution, SolutionError, compute_costs, extract_solution
from gridplan.solver.bnb import SolverOptions, solve_milp

from instances import ledger_cost, toy_planning

EXACT = SolverOptions(opt_ca=0.0, opt_cr=0.0)


@pytest.fixture(scope="module")
def solved():
    cat, s, cfg = toy_planning()
    m = build_model(cat, s, cfg)
    r = solve_milp(m, EXACT)
    return cat, s, cfg, m, r


def test_zero_demand_installs_nothing():
    cat, s, cfg = toy_planning(demand=(0.0, 0.0, 0.0, 0.0))
    m = build_model(cat, s, cfg)
    r = solve_milp(m, EXACT)
    sol = extract_solution(m, r.x, cat, s, cfg)
    assert sol.chosen() == []
    assert sol.objective == 0.0
    assert sol.costs.total == 0.0


def test_recomputed_cost_matches_objective(solved):
    cat, s, cfg, m, r = solved
    sol = extract_solution(m, r.x, cat, s, cfg)
    assert abs(ledger_cost(sol, cat, s, cfg) - r.objective) <= 1e-6 * abs(r.objective)
    assert sol.cost_discrepancy <= 1e-9


def test_fractional_binary_is_named(solved):
    cat, s, cfg, m, r = solved
    x = r.x.copy()
    x[m.var("a", "g")] = 0.4
    with pytest.raises(SolutionError, match=r"a\[g\]"):
        extract_solution(m, x, cat, s, cfg)


def test_wrong_length(solved):
    cat, s, cfg, m, r = solved
    with pytest.raises(SolutionError):
        extract_solution(m, r.x[:-1], cat, s, cfg)


def test_json_round_trip(solved):
    cat, s, cfg, m, r = solved
    sol = extract_solution(m, r.x, cat, s, cfg, bound=r.bound, status=r.status)
    back = PlanSolution.from_dict(json.loads(sol.to_json()))
    assert back.to_json() == sol.to_json()


def test_cost_breakdown_terms(solved):
    cat, s, cfg, m, r = solved
    sol = extract_solution(m, r.x, cat, s, cfg)
    c = compute_costs(sol, cat, s, cfg)
    expected_initial = sum(cat.unit(i).alpha0 * sol.rated_power[i] + cat.unit(i).beta0 * sol.capacity[i]
                           for i in sol.installed)
    assert c.initial == pytest.approx(expected_initial)
    assert len(c.operational) == len(c.maintenance) == 1


def test_co2_daily_is_surplus_sum(solved):
    cat, s, cfg, m, r = solved
    sol = extract_solution(m, r.x, cat, s, cfg)
    np.testing.assert_allclose(sol.co2_daily, sol.yx["co2"].sum(axis=2))
