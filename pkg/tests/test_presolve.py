import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridplan.formulation.build import build_model
from gridplan.formulation.model import MilpModel
from gridplan.solver.bnb import SolverOptions, solve_milp
from gridplan.solver.presolve import PresolveInfeasible, presolve

from instances import random_milp, toy_planning

EXACT = dict(opt_ca=0.0, opt_cr=0.0)


def test_uninstalled_unit_is_eliminated():
    cat, s, cfg = toy_planning()
    m = build_model(cat, s, cfg)
    m.ub[m.var("a", "g")] = 0.0
    red, pm = presolve(m)
    gone = {m.var("a", "g"), m.var("rp", "g")}
    gone |= {m.var(f, "g", 0, 0, t) for f in ("p", "kc") for t in range(4)}
    kept = set(pm.kept_cols.tolist())
    assert gone.isdisjoint(kept)
    assert np.all(pm.fixed_values[sorted(gone)] == 0.0)


def test_tight_model_is_identity():
    m = MilpModel.from_arrays([1.0, 2.0], [[1.0, 1.0], [1.0, -1.0]], ["G", "L"], [1.0, 0.5],
                              lb=[0.0, 0.0], ub=[1.0, 1.0])
    red, pm = presolve(m)
    assert pm.is_identity
    assert red.n_vars == 2 and red.n_rows == 2
    np.testing.assert_array_equal(pm.expand(np.array([0.3, 0.7])), [0.3, 0.7])


def test_conflicting_bounds():
    m = MilpModel.from_arrays([1.0], None, [], [], lb=[2.0], ub=[1.0])
    with pytest.raises(PresolveInfeasible):
        presolve(m)


def test_unsatisfiable_row():
    m = MilpModel.from_arrays([1.0, 1.0], [[1.0, 1.0]], "G", [5.0], ub=[1.0, 1.0])
    with pytest.raises(PresolveInfeasible):
        presolve(m)


def test_toy_planning_same_objective():
    cat, s, cfg = toy_planning()
    m = build_model(cat, s, cfg)
    a = solve_milp(m, SolverOptions(presolve=True, **EXACT))
    b = solve_milp(m, SolverOptions(presolve=False, **EXACT))
    assert a.objective == pytest.approx(b.objective, rel=1e-7)


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1))
def test_presolved_and_direct_agree(seed):
    rng = np.random.default_rng(seed)
    m = random_milp(rng, int(rng.integers(1, 8)), int(rng.integers(0, 8)), int(rng.integers(1, 6)))
    a = solve_milp(m, SolverOptions(presolve=True, **EXACT))
    b = solve_milp(m, SolverOptions(presolve=False, **EXACT))
    assert a.status == b.status
    if a.has_incumbent:
        assert a.objective == pytest.approx(b.objective, rel=1e-7, abs=1e-7)
        assert m.violations(a.x)["integrality"] == 0.0
