import math

import numpy as np
import pytest

from gridplan.formulation.build import FormulationError, build_model, census, reserve_level
from gridplan.formulation.config import PlanningConfig
from gridplan.solver.bnb import SolverOptions, solve_milp
from gridplan.solver.lp import solve_lp

from instances import ELECT, GAS, battery, flat_scenario, generator, toy_catalog, toy_planning

EXACT = SolverOptions(opt_ca=0.0, opt_cr=0.0)


def test_census_on_toy_instance():
    cat, s, cfg = toy_planning()
    c = census(build_model(cat, s, cfg))
    R, T = 3, 4  # elect, gas, co2
    assert c.variables == {
        "a": 3, "rp": 3, "b": 1, "kc": T, "p": T, "soc0": 1, "ks": T, "pch": T, "pdch": T,
        "soc": T, "sp": R, "u": R * T, "yx": R * T, "xi": 1,
    }
    assert c.rows == {
        "n_install": 1, "rp_lo": 3, "rp_hi": 3, "b_lo": 1, "b_hi": 1,
        "gen_hi": T, "gen_on": T, "gen_lo": T, "soc0_lo": 1, "soc0_hi": 1,
        "ch_hi": T, "dch_hi": T, "ch_mode": T, "dch_mode": T, "soc_lo": T, "soc_hi": T,
        "soc_dyn": T, "soc_cycle": 1, "balance": R * T, "peak": T, "co2_cap": 1,
    }
    assert c.n_binary == 3 + 2 * T
    assert c.n_continuous == sum(c.variables.values()) - c.n_binary


def test_row_names_carry_family_and_key():
    cat, s, cfg = toy_planning()
    m = build_model(cat, s, cfg)
    i = m.row_index["balance"][("elect", 0, 0, 2)]
    assert m.row_names[i] == "balance[elect,0,0,2]"
    assert m.rhs[i] == 2500.0


def test_zero_delta_gives_zero_peak_penalty():
    cat, s, cfg = toy_planning()
    cfg = cfg.replace(delta=0.0)
    m = build_model(cat, s, cfg)
    assert "peak" not in m.row_index
    r = solve_milp(m, EXACT)
    assert r.x[m.var("xi")] == 0.0


def test_positive_delta_prices_peak():
    cat = toy_catalog([generator("g", 0.1, rp_max=5000.0)], resources=(ELECT, GAS))
    s = flat_scenario([1000.0, 4000.0], dt=12.0, buy={"elect": 50.0, "gas": 0.0})
    cfg = PlanningConfig(day_weights=(365.0,), intervals=2, dt=12.0, delta=0.01, reserve_fraction={})
    m = build_model(cat, s, cfg)
    r = solve_milp(m, EXACT)
    p = r.x[[m.var("p", "g", 0, 0, t) for t in range(2)]]
    assert r.x[m.var("xi")] == pytest.approx(0.01 * p.max())


def test_forced_off_and_demand_above_import_cap_is_infeasible():
    cat, s, cfg = toy_planning(demand=(800.0, 1200.0, 4000.0, 1500.0))
    m = build_model(cat, s, cfg)
    for e in cat.equipment:
        m.ub[m.var("a", e.id)] = 0.0
    assert solve_milp(m, EXACT).status == "infeasible"
    assert solve_lp(m).status == "infeasible"


def test_reserve_is_fixed_at_peak_fraction():
    cat, s, cfg = toy_planning()
    m = build_model(cat, s, cfg)
    j = m.var("sp", "elect", 0, 0)
    assert m.lb[j] == m.ub[j] == pytest.approx(0.03 * 2500.0)
    np.testing.assert_allclose(reserve_level(s, cfg, "elect"), [[75.0]])


def test_import_cap_and_surplus_cap_bounds():
    cat, s, cfg = toy_planning()
    m = build_model(cat, s, cfg)
    assert m.ub[m.var("u", "elect", 0, 0, 1)] == 3000.0
    assert m.ub[m.var("yx", "elect", 0, 0, 1)] == pytest.approx(0.05 * 2500.0)
    # resources that cannot be bought have zero import
    assert m.ub[m.var("u", "co2", 0, 0, 1)] == 0.0


def test_config_overrides_catalog_caps():
    cat, s, cfg = toy_planning()
    m = build_model(cat, s, cfg.replace(import_caps={"elect": 10.0}, surplus_cap_fraction={"elect": 0.5}))
    assert m.ub[m.var("u", "elect", 0, 0, 0)] == 10.0
    assert m.ub[m.var("yx", "elect", 0, 0, 0)] == pytest.approx(1250.0)


def test_no_emission_rows_without_a_cap():
    cat, s, cfg = toy_planning(lco2=math.inf)
    assert "co2_cap" not in build_model(cat, s, cfg).row_index


def test_objective_escalates_by_year():
    cat = toy_catalog([battery()])
    s = flat_scenario(np.full((3, 1, 2), 100.0), dt=12.0)
    cfg = PlanningConfig(years=3, day_weights=(365.0,), intervals=2, dt=12.0, inflation=0.12)
    m = build_model(cat, s, cfg)
    costs = [m.c[m.var("u", "elect", k, 0, 0)] for k in range(3)]
    np.testing.assert_allclose(costs, [365 * 12 * 1.12 ** k for k in range(3)])


def test_grid_mismatch():
    cat, s, cfg = toy_planning()
    with pytest.raises(FormulationError, match="does not match"):
        build_model(cat, s, cfg.replace(intervals=5))


def test_missing_renewable_series():
    cat, _, cfg = toy_planning()
    s = flat_scenario([1.0, 1.0, 1.0, 1.0], dt=6.0)
    with pytest.raises(FormulationError, match="pv"):
        build_model(cat, s, cfg)


def test_demand_for_undeclared_resource():
    cat, s, cfg = toy_planning()
    with pytest.raises(FormulationError, match="steam"):
        build_model(cat, s.with_demand("steam", 1.0), cfg)
