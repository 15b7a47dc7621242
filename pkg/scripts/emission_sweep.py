"""Sweep the daily emission limit on a fixed scenario and print cost and CO2 per point.

    python scripts/emission_sweep.py runs/desk/scenario.csv --config scripts/desk.toml
"""
import argparse
import math

from gridplan.catalog import load_catalog, load_default_catalog
from gridplan.cli import load_run_config
from gridplan.formulation.build import build_model
from gridplan.formulation.solution import extract_solution
from gridplan.scenario.scenario_set import read_scenario
from gridplan.solver.bnb import SolverOptions, solve_milp


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--limits", default="0,1e6,2e6,4e6,inf", help="comma-separated daily CO2 limits")
    p.add_argument("--time-limit", type=float, default=120.0)
    a = p.parse_args()
    run = load_run_config(a.config)
    cat = load_catalog(run.catalog_dir) if run.catalog_dir else load_default_catalog()
    if run.equipment is not None:
        cat = cat.subset(run.equipment)
    s = read_scenario(a.scenario)
    solver = {k: v for k, v in run.solver.items() if k != "time_limit"}
    opts = SolverOptions(time_limit=a.time_limit, **solver)
    print(f"{'lco2':>12} {'status':>20} {'objective':>16} {'gap':>9} {'max daily co2':>14}  installed")
    for raw in a.limits.split(","):
        lco2 = math.inf if raw.strip() == "inf" else float(raw)
        cfg = run.planning.replace(lco2=lco2)
        m = build_model(cat, s, cfg)
        r = solve_milp(m, opts)
        if r.x is None:
            print(f"{lco2:>12g} {r.status:>20}")
            continue
        sol = extract_solution(m, r.x, cat, s, cfg, bound=r.bound, status=r.status)
        chosen = ", ".join(i for i, on in sol.installed.items() if on)
        print(f"{lco2:>12g} {r.status:>20} {r.objective:>16.6g} {r.rel_gap:>9.2e} "
              f"{sol.co2_daily.max():>14.6g}  {chosen}")


if __name__ == "__main__":
    main()
