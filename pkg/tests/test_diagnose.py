from gridplan.formulation.build import build_model
from gridplan.formulation.diagnose import diagnose_infeasibility

from instances import toy_planning


def _forced_off(demand):
    cat, s, cfg = toy_planning(demand=demand)
    m = build_model(cat, s, cfg)
    for e in cat.equipment:
        m.ub[m.var("a", e.id)] = 0.0
    return m


def test_balance_is_tightest_when_demand_exceeds_import_cap():
    diag = diagnose_infeasibility(_forced_off((800.0, 1200.0, 4000.0, 1500.0)))
    assert diag.tightest == "balance"
    assert diag.total > 0
    assert diag.worst_row == "balance[elect,0,0,2]"


def test_slack_matches_the_shortfall():
    # 4000 demand + 3% reserve on the 4000 peak, against a 3000 import cap
    diag = diagnose_infeasibility(_forced_off((800.0, 1200.0, 4000.0, 1500.0)))
    assert abs(diag.total - (4000.0 + 0.03 * 4000.0 - 3000.0)) < 1e-6


def test_feasible_model_needs_no_slack():
    cat, s, cfg = toy_planning()
    diag = diagnose_infeasibility(build_model(cat, s, cfg))
    assert diag.families == [] and diag.tightest == "" and diag.total == 0.0


def test_lines_name_every_family():
    diag = diagnose_infeasibility(_forced_off((800.0, 1200.0, 4000.0, 1500.0)))
    text = "\n".join(diag.lines())
    for fam, _ in diag.families:
        assert fam in text
