"""Write a synthetic hourly history file drawn from known model parameters."""
import argparse

from gridplan.scenario.synthetic import write_synthetic_history


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out", help="CSV file to write")
    p.add_argument("--days", type=int, default=730)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature-noise", type=float, default=0.5, help="std of temperature noise, degC")
    p.add_argument("--demand-noise", type=float, default=50.0, help="std of hourly demand noise, kWh")
    a = p.parse_args()
    noise = {"temperature_c": a.temperature_noise, "demand_kwh": a.demand_noise}
    h = write_synthetic_history(a.out, days=a.days, seed=a.seed, noise=noise)
    print(f"wrote {len(h.t)} hourly records to {a.out}")


if __name__ == "__main__":
    main()
