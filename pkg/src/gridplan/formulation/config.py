"""Planning configuration and its TOML representation."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DAYS_PER_YEAR = 365.0
MAX_RESERVE_FRACTION = 0.03


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PlanningConfig:
    years: int = 1
    day_weights: tuple[float, ...] = (365.0,)  # same weights every year, summing to 365
    intervals: int = 48
    dt: float = 0.5
    max_installed: int = 10
    lco2: float = math.inf  # per (year, day), same unit as the co2 resource
    delta: float = 0.01
    inflation: float = 0.12
    reserve_fraction: Mapping[str, float] = field(default_factory=lambda: {"elect": 0.03})
    # None means "take the catalog value"
    import_caps: Optional[Mapping[str, float]] = None
    surplus_cap_fraction: Optional[Mapping[str, float]] = None
    electricity: str = "elect"
    co2: str = "co2"
    opt_ca: float = 1e-2
    opt_cr: float = 1e-2

    def __post_init__(self):
        object.__setattr__(self, "day_weights", tuple(float(w) for w in self.day_weights))
        object.__setattr__(self, "reserve_fraction", dict(self.reserve_fraction))
        errs = self.problems()
        if errs:
            raise ConfigError("; ".join(errs))

    def problems(self) -> list[str]:
        out = []
        if self.years <= 0 or self.intervals <= 0 or self.max_installed <= 0:
            out.append("years, intervals and max_installed must be positive")
        if not self.dt > 0:
            out.append("dt must be positive")
        if not self.day_weights or any(w <= 0 for w in self.day_weights):
            out.append("day weights must be positive")
        elif abs(sum(self.day_weights) - DAYS_PER_YEAR) > 1e-9 * DAYS_PER_YEAR:
            out.append(f"day weights sum to {sum(self.day_weights)}, expected {DAYS_PER_YEAR:g}")
        for r, rho in self.reserve_fraction.items():
            if not 0 <= rho <= MAX_RESERVE_FRACTION:
                out.append(f"reserve fraction for {r} must lie in [0, {MAX_RESERVE_FRACTION}]")
        if self.lco2 < 0 or self.delta < 0 or self.inflation <= -1:
            out.append("lco2 and delta must be nonnegative, inflation > -1")
        for name in ("import_caps", "surplus_cap_fraction"):
            for r, v in (getattr(self, name) or {}).items():
                if v < 0:
                    out.append(f"{name}[{r}] must be nonnegative")
        if self.opt_ca < 0 or self.opt_cr < 0:
            out.append("opt_ca and opt_cr must be nonnegative")
        return out

    @property
    def n_days(self) -> int:
        return len(self.day_weights)

    def escalation(self, k: int) -> float:
        """(1+inf)^(k-1) for zero-based year index k."""
        return (1.0 + self.inflation) ** k

    def replace(self, **kw) -> "PlanningConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return PlanningConfig(**d)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["day_weights"] = list(self.day_weights)
        for k, v in list(d.items()):
            if isinstance(v, float) and math.isinf(v):
                d[k] = "inf"
        return d


_KEYS = {f.name for f in fields(PlanningConfig)}


def config_from_mapping(raw: Mapping[str, Any]) -> PlanningConfig:
    """Build from a parsed ``[planning]`` table; ``"inf"`` strings map to infinity."""
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"unknown planning keys: {', '.join(sorted(unknown))}")

    def conv(v):
        if isinstance(v, str) and v.lower() in ("inf", "infinity", "unbounded"):
            return math.inf
        if isinstance(v, Mapping):
            return {k: conv(x) for k, x in v.items()}
        return v

    kw = {k: conv(v) for k, v in raw.items()}
    if "day_weights" in kw:
        kw["day_weights"] = tuple(kw["day_weights"])
    try:
        return PlanningConfig(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_toml(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None


def load_config(path: str | Path) -> PlanningConfig:
    doc = load_toml(path)
    return config_from_mapping(doc.get("planning", {}))
