"""Desk-scale study: synthetic history -> fitted models -> scenario -> plan -> report.

    python scripts/desk_study.py runs/desk
"""
import argparse
import sys
from pathlib import Path

from gridplan.cli import main as gridplan
from gridplan.scenario.synthetic import write_synthetic_history

HERE = Path(__file__).resolve().parent


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("out", nargs="?", default="runs/desk")
    p.add_argument("--config", default=str(HERE / "desk.toml"))
    p.add_argument("--likelihood", default="likely", choices=("likely", "mid_likely", "unlikely"))
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--time-limit", type=float, default=600.0)
    a = p.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    hist = out / "history.csv"
    if not hist.exists():
        write_synthetic_history(hist, days=730, seed=a.seed,
                                noise={"temperature_c": 0.5, "demand_kwh": 50.0})
    return gridplan(["pipeline", "--config", a.config, "--out", str(out), "--history", str(hist),
                     "--likelihood", a.likelihood, "--seed", str(a.seed), "--time-limit", str(a.time_limit)])


if __name__ == "__main__":
    sys.exit(main())
