import csv
import json

import numpy as np
import pytest

from gridplan import cli
from gridplan.catalog import write_catalog
from gridplan.formulation.build import build_model
from gridplan.formulation.config import PlanningConfig
from gridplan.scenario.synthetic import write_synthetic_history

from instances import battery, desk_instance, enumerate_milp, flat_scenario, generator, toy_catalog, toy_planning

TOY_TOML = """
[planning]
years = 1
day_weights = [365.0]
intervals = {T}
dt = {dt}
lco2 = {lco2}

[catalog]
dir = "cat"
"""


def _setup(tmp_path, cat, s, lco2="1e7"):
    write_catalog(cat, tmp_path / "cat")
    s.write(tmp_path / "scenario.csv")
    cfg = tmp_path / "run.toml"
    cfg.write_text(TOY_TOML.format(T=s.intervals, dt=s.dt, lco2=lco2))
    return cfg


def _solve(tmp_path, cfg, *extra):
    out = tmp_path / "out"
    code = cli.main(["solve", "--config", str(cfg), "--out", str(out),
                     "--scenario", str(tmp_path / "scenario.csv"), "--optca", "0", "--optcr", "0", *extra])
    return code, out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def toy(tmp_path):
    cat, s, _ = toy_planning()
    return _setup(tmp_path, cat, s)


def test_solve_toy(tmp_path, toy):
    code, out = _solve(tmp_path, toy)
    assert code == cli.EXIT_OK
    sol = json.loads((out / "solution.json").read_text())
    assert sol["objective"] == pytest.approx(2867500.0, rel=1e-9)
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 0 and man["status"] == "ok"
    assert set(man["inputs"]) >= {"config", "scenario", "catalog"}
    assert (out / "schedule.csv").is_file() and (out / "node-log.csv").is_file()


def test_out_dir_is_created(tmp_path, toy):
    code, out = _solve(tmp_path, toy, "--out", str(tmp_path / "a" / "b" / "c"))
    assert code == 0
    assert (tmp_path / "a" / "b" / "c" / "solution.json").is_file()


def test_report_dispatch_identity_and_soc(tmp_path, toy):
    code, out = _solve(tmp_path, toy)
    assert code == 0
    assert cli.main(["report", "--config", str(toy), "--out", str(out)]) == 0
    rows = _rows(out / "report" / "dispatch.csv")
    assert len(rows) == 4
    for r in rows:
        units = sum(float(r[u]) for u in ("g", "bat", "pv"))
        rhs = float(r["demand"]) + float(r["surplus"]) + float(r["reserve"]) - float(r["import"])
        assert units == pytest.approx(rhs, abs=1e-6)
    soc = _rows(out / "report" / "soc.csv")
    assert [int(r["interval"]) for r in soc] == [0, 1, 2, 3, 4]
    assert float(soc[0]["soc"]) == pytest.approx(float(soc[-1]["soc"]), abs=1e-6)


def test_zero_demand_installs_nothing(tmp_path):
    cat = toy_catalog([generator("g", 1.0), battery()])
    cfg = _setup(tmp_path, cat, flat_scenario([0.0, 0.0], dt=12.0))
    code, out = _solve(tmp_path, cfg)
    assert code == 0
    sol = json.loads((out / "solution.json").read_text())
    assert sol["objective"] == 0.0
    assert not any(v["installed"] for v in sol["equipment"].values())


def test_cheap_unit_wins(tmp_path):
    cat = toy_catalog([generator("cheap", 1.0), generator("dear", 3.0)])
    s = flat_scenario([2000.0, 2000.0], dt=12.0, buy={"elect": 10.0, "gas": 1.0})
    cfg = _setup(tmp_path, cat, s, lco2='"inf"')
    code, out = _solve(tmp_path, cfg)
    assert code == 0
    sol = json.loads((out / "solution.json").read_text())
    assert {i: v["installed"] for i, v in sol["equipment"].items()} == {"cheap": True, "dear": False}
    m = build_model(cat, s, PlanningConfig(day_weights=(365.0,), intervals=2, dt=12.0))
    best, _ = enumerate_milp(m)
    assert sol["objective"] == pytest.approx(best, rel=1e-9)


def test_infeasible_names_balance(tmp_path, capsys):
    cat = toy_catalog([battery()])
    cfg = _setup(tmp_path, cat, flat_scenario([4000.0] * 4, dt=6.0))
    code, out = _solve(tmp_path, cfg)
    assert code == cli.EXIT_INFEASIBLE
    assert "tightest violated family: balance" in (out / "infeasibility.txt").read_text()
    assert "balance" in capsys.readouterr().err
    assert not (out / "solution.json").exists()
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 3


def test_node_limit_reached(tmp_path):
    cat, s, _ = desk_instance(1)
    cfg = tmp_path / "run.toml"
    write_catalog(cat, tmp_path / "cat")
    s.write(tmp_path / "scenario.csv")
    cfg.write_text('[planning]\nday_weights = [182.0, 183.0]\n[catalog]\ndir = "cat"\n')
    code, out = _solve(tmp_path, cfg, "--node-limit", "3", "--lp", "highs")
    assert code == cli.EXIT_LIMIT
    man = json.loads((out / "manifest.json").read_text())
    assert man["result"]["status"] == "limit_reached" and man["result"]["nodes"] == 3
    if (out / "solution.json").exists():
        sol = json.loads((out / "solution.json").read_text())
        assert sol["objective"] >= sol["bound"]


def test_usage_errors(tmp_path, toy):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["solve"]) == cli.EXIT_USAGE
    assert cli.main(["sample", "--models", "m.json", "--likelihood", "probable"]) == cli.EXIT_USAGE
    assert cli.main(["fit", "--history", "h.csv", "--out", str(tmp_path), "--kinds", "tide"]) == cli.EXIT_USAGE
    assert cli.main(["fit", "--history", "h.csv", "--out", str(tmp_path), "--confidence", "1.5"]) == cli.EXIT_USAGE


def test_data_errors(tmp_path, toy):
    assert cli.main(["solve", "--config", str(toy), "--out", str(tmp_path / "o"),
                     "--scenario", str(tmp_path / "missing.csv")]) == cli.EXIT_DATA
    bad = tmp_path / "bad.toml"
    bad.write_text("[planning]\nhorizon = 3\n")
    assert cli.main(["solve", "--config", str(bad), "--out", str(tmp_path / "o"),
                     "--scenario", str(tmp_path / "scenario.csv")]) == cli.EXIT_DATA
    (tmp_path / "scenario.csv").write_text("not,a,scenario\n1,2,3\n")
    assert cli.main(["solve", "--config", str(toy), "--out", str(tmp_path / "o"),
                     "--scenario", str(tmp_path / "scenario.csv")]) == cli.EXIT_DATA


def test_internal_error_exit(tmp_path, toy, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("boom")
    monkeypatch.setattr(cli, "solve_milp", boom)
    code, out = _solve(tmp_path, toy)
    assert code == cli.EXIT_INTERNAL
    assert json.loads((out / "manifest.json").read_text())["status"] == "failed"


def test_fit_and_sample_are_deterministic(tmp_path):
    hist = tmp_path / "history.csv"
    write_synthetic_history(hist, days=120, seed=3, noise={"temperature_c": 0.3, "demand_kwh": 40.0})
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["fit", "--history", str(hist), "--out", str(out), "--kinds",
                         "daily_temperature,hourly_temperature,solar_irradiance,weibull_wind,"
                         "population,daily_demand,hourly_demand"]) == 0
        assert cli.main(["sample", "--models", str(out / "models.json"), "--out", str(out),
                         "--seed", "5", "--likelihood", "mid"]) == 0
        outs.append(out)
    a, b = outs
    assert (a / "models.json").read_bytes() == (b / "models.json").read_bytes()
    assert (a / "scenario.csv").read_bytes() == (b / "scenario.csv").read_bytes()
    lines = (a / "scenario.csv").read_text().splitlines()
    data = [l for l in lines if not l.startswith("#")]
    assert len(data) - 1 == 48
    c = tmp_path / "c"
    assert cli.main(["sample", "--models", str(a / "models.json"), "--out", str(c), "--seed", "6",
                     "--likelihood", "mid"]) == 0
    assert (c / "scenario.csv").read_bytes() != (a / "scenario.csv").read_bytes()
