"""Command-line pipeline: fit | sample | build | solve | report | pipeline.

Exit codes: 0 success, 1 usage, 2 data or validation error, 3 infeasible,
4 solver limit reached, 5 internal error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .catalog import Catalog, CatalogError, default_catalog_dir, load_catalog, validate_catalog
from .formulation.build import FormulationError, build_model, census
from .formulation.config import ConfigError, PlanningConfig, config_from_mapping, load_toml
from .formulation.diagnose import diagnose_infeasibility
from .formulation.feasibility import check_feasibility
from .formulation.mps import MpsError, export_mps
from .formulation.solution import PlanSolution, SolutionError, extract_solution
from .reporting import balance_csv, demand_csv, node_log_csv, schedule_csv, soc_csv, summary_text, weather_csv
from .scenario.fitting import FitError
from .scenario.generate import ScenarioOptions, generate_scenario
from .scenario.history import ALL_KINDS, HistoryError, ModelSet, fit_history, read_history
from .scenario.models import ModelInputError
from .scenario.scenario_set import GridSpec, ScenarioError, normalize_likelihood, read_scenario
from .solver.bnb import MilpResult, SolverError, SolverOptions, solve_milp

log = logging.getLogger("gridplan")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_INTERNAL = range(6)
DATA_ERRORS = (CatalogError, ConfigError, ScenarioError, HistoryError, FitError, ModelInputError,
               FormulationError, MpsError, SolutionError, FileNotFoundError, IsADirectoryError)


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- run configuration -----------------------------------------------------

SOLVER_KEYS = {"opt_ca", "opt_cr", "time_limit", "node_limit", "branching", "node_selection", "plunge",
               "threads", "presolve", "lp_method"}


@dataclass
class RunConfig:
    planning: PlanningConfig
    day_of_year: tuple[float, ...]
    start_year: int = 0
    likelihood: str = "likely"
    seed: int = 0
    confidence: float = 0.95
    scenario: ScenarioOptions = field(default_factory=ScenarioOptions)
    solver: dict[str, Any] = field(default_factory=dict)
    catalog_dir: Optional[str] = None
    equipment: Optional[list[str]] = None
    kinds: tuple[str, ...] = ALL_KINDS
    raw: dict[str, Any] = field(default_factory=dict)

    def grid(self) -> GridSpec:
        p = self.planning
        return GridSpec(p.years, self.day_of_year, p.intervals, p.dt, self.start_year)


def default_days(n: int) -> tuple[float, ...]:
    """Evenly spread representative days (mid-points of equal year slices)."""
    return tuple(float(round(365.0 * (i + 0.5) / n + 0.5)) for i in range(n))


def load_run_config(path: Optional[str]) -> RunConfig:
    doc = load_toml(path) if path else {}
    known = {"planning", "grid", "scenario", "solver", "catalog", "fit"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    planning = config_from_mapping(doc.get("planning", {}))
    grid = doc.get("grid", {})
    days = tuple(float(d) for d in grid.get("day_of_year", default_days(planning.n_days)))
    if len(days) != planning.n_days:
        raise ConfigError(f"grid.day_of_year lists {len(days)} days, planning.day_weights has {planning.n_days}")
    sc = dict(doc.get("scenario", {}))
    opts_kw = {}
    for key in ("demand_resource", "demand_ratios", "irradiance_ref", "price_buy", "price_sell"):
        if key in sc:
            opts_kw[key] = sc.pop(key)
    run = RunConfig(planning, days, int(grid.get("start_year", 0)))
    run.likelihood = normalize_likelihood(sc.pop("likelihood", "likely"))
    run.seed = int(sc.pop("seed", 0))
    run.confidence = float(sc.pop("confidence", 0.95))
    if sc:
        raise ConfigError(f"unknown scenario keys: {', '.join(sorted(sc))}")
    try:
        run.scenario = ScenarioOptions(**opts_kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    solver = doc.get("solver", {})
    bad = set(solver) - SOLVER_KEYS
    if bad:
        raise ConfigError(f"unknown solver keys: {', '.join(sorted(bad))}")
    run.solver = dict(solver)
    cat = doc.get("catalog", {})
    run.catalog_dir = cat.get("dir")
    if run.catalog_dir and path:
        run.catalog_dir = str((Path(path).parent / run.catalog_dir).resolve()) \
            if not Path(run.catalog_dir).is_absolute() else run.catalog_dir
    run.equipment = list(cat["equipment"]) if "equipment" in cat else None
    run.kinds = tuple(doc.get("fit", {}).get("kinds", ALL_KINDS))
    run.raw = doc
    return run


# -- manifest --------------------------------------------------------------

def digest(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(path.iterdir()):
            if f.is_file():
                h.update(f.name.encode())
                h.update(f.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


class Manifest:
    def __init__(self, out: Path, command: str, argv: Sequence[str], run: Optional[RunConfig]):
        self.path = out / "manifest.json"
        self.doc: dict[str, Any] = {
            "tool": "gridplan", "version": __version__, "command": command, "argv": list(argv),
            "inputs": {}, "config": None, "seed": None, "timings": {}, "status": "running",
            "exit_code": None,
        }
        if run is not None:
            self.doc["config"] = _jsonable(run.raw)
            self.doc["seed"] = run.seed
        self._t: dict[str, float] = {}

    def add_input(self, role: str, path: Path) -> None:
        self.doc["inputs"][role] = {"path": str(path.resolve()), "sha256": digest(path)}

    def start(self, stage: str) -> None:
        self._t[stage] = time.perf_counter()
        log.info("stage %s", stage)

    def stop(self, stage: str) -> None:
        self.doc["timings"][stage] = round(time.perf_counter() - self._t.pop(stage), 6)

    def write(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


# -- stages ----------------------------------------------------------------

def _catalog(run: RunConfig, override: Optional[str]) -> tuple[Catalog, Path]:
    d = Path(override or run.catalog_dir or default_catalog_dir())
    cat = load_catalog(d)
    if run.equipment is not None:
        try:
            cat = cat.subset(run.equipment)
        except KeyError as e:
            raise CatalogError(f"unknown equipment {e.args[0]!r} in config") from None
    rep = validate_catalog(cat)
    if not rep.ok:
        raise CatalogError("invalid catalog: " + "; ".join(str(v) for v in rep.violations[:5]))
    return cat, d


def stage_fit(history: Path, run: RunConfig, out: Path, man: Manifest) -> ModelSet:
    man.add_input("history", history)
    man.start("fit")
    h = read_history(history)
    ms = fit_history(h, run.kinds)
    out.mkdir(parents=True, exist_ok=True)
    ms.write(out / "models.json", run.confidence)
    man.stop("fit")
    for kind, m in ms.models.items():
        se = ", ".join(f"{v:.4g}" for v in m.std_errors)
        print(f"{kind:<20} mse={m.mse:.4g}  n={m.n_samples}  std.err=[{se}]"
              + ("" if m.converged else "  (NOT CONVERGED)"))
    print(f"wind buckets fitted: {len(ms.wind_buckets)}")
    bad = [k for k, m in ms.models.items() if not m.converged]
    if bad:
        raise CliFailure(EXIT_DATA, f"fit did not converge for {', '.join(bad)}; see models.json diagnostics")
    return ms


def stage_sample(models: Path, run: RunConfig, out: Path, man: Manifest, catalog: Optional[str]) -> Path:
    man.add_input("models", models)
    cat, cdir = _catalog(run, catalog)
    man.add_input("catalog", cdir)
    man.start("sample")
    ms = ModelSet.read(models)
    s = generate_scenario(ms, run.grid(), run.likelihood, run.seed, cat, run.scenario)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "scenario.csv"
    s.write(path)
    man.stop("sample")
    print(f"scenario: {s.years} year(s) x {s.n_days} day(s) x {s.intervals} intervals, "
          f"likelihood={s.likelihood}, seed={run.seed}, clamps={dict(s.clamps)}")
    return path


def _load_problem(scenario: Path, run: RunConfig, man: Manifest, catalog: Optional[str]):
    man.add_input("scenario", scenario)
    cat, cdir = _catalog(run, catalog)
    man.add_input("catalog", cdir)
    s = read_scenario(scenario)
    return cat, s


def stage_build(scenario: Path, run: RunConfig, out: Path, man: Manifest, catalog: Optional[str]) -> None:
    cat, s = _load_problem(scenario, run, man, catalog)
    man.start("build")
    m = build_model(cat, s, run.planning)
    exp = export_mps(m)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.mps").write_text(exp.text, encoding="utf-8")
    if exp.columns or exp.rows:
        (out / "model-names.json").write_text(
            json.dumps({"columns": exp.columns, "rows": exp.rows}, indent=1, sort_keys=True) + "\n",
            encoding="utf-8")
    man.stop("build")
    cen = census(m)
    print(f"variables: {m.n_vars} ({cen.n_binary} binary, {cen.n_continuous} continuous); rows: {m.n_rows}")
    for fam, n in sorted(cen.variables.items()):
        print(f"  var {fam:<8} {n}")
    for fam, n in sorted(cen.rows.items()):
        print(f"  row {fam:<10} {n}")


def _solver_options(run: RunConfig, args: argparse.Namespace) -> SolverOptions:
    kw = dict(opt_ca=run.planning.opt_ca, opt_cr=run.planning.opt_cr)
    kw.update(run.solver)
    flags = {"optca": "opt_ca", "optcr": "opt_cr", "time_limit": "time_limit", "threads": "threads",
             "node_limit": "node_limit", "branching": "branching", "node_selection": "node_selection",
             "lp": "lp_method"}
    for flag, key in flags.items():
        v = getattr(args, flag, None)
        if v is not None:
            kw[key] = v
    kw["seed"] = run.seed
    try:
        return SolverOptions(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"solver options: {e}") from None


def stage_solve(scenario: Path, run: RunConfig, out: Path, man: Manifest, catalog: Optional[str],
                opts: SolverOptions) -> int:
    cat, s = _load_problem(scenario, run, man, catalog)
    cfg = run.planning.replace(opt_ca=opts.opt_ca, opt_cr=opts.opt_cr)
    man.doc["solver"] = asdict(opts)
    man.start("build")
    m = build_model(cat, s, cfg)
    man.stop("build")
    man.start("solve")
    res = solve_milp(m, opts)
    man.stop("solve")
    man.doc["result"] = {"status": res.status, "objective": _jsonable(res.objective),
                         "bound": _jsonable(res.bound), "rel_gap": _jsonable(res.rel_gap),
                         "abs_gap": _jsonable(res.abs_gap), "nodes": res.nodes}
    out.mkdir(parents=True, exist_ok=True)
    (out / "node-log.csv").write_text(node_log_csv(res.node_log), encoding="utf-8")
    if res.status == "infeasible":
        diag = diagnose_infeasibility(m, opts.lp_method)
        text = "model is infeasible\n" + f"tightest violated family: {diag.tightest}\n" + \
            "\n".join(diag.lines()) + "\n"
        (out / "infeasibility.txt").write_text(text, encoding="utf-8")
        man.doc["result"]["tightest_family"] = diag.tightest
        raise CliFailure(EXIT_INFEASIBLE, f"infeasible: tightest violated family is {diag.tightest}")
    if res.x is None:
        raise CliFailure(EXIT_LIMIT, f"solver stopped ({res.status}) after {res.nodes} nodes without an incumbent")
    man.start("verify")
    sol = extract_solution(m, res.x, cat, s, cfg, bound=res.bound, status=res.status)
    rep = check_feasibility(sol, cat, s, cfg)
    man.stop("verify")
    if not rep.ok:
        fam, v = rep.worst()
        (out / "feasibility.txt").write_text("\n".join(rep.lines()) + "\n", encoding="utf-8")
        raise CliFailure(EXIT_INTERNAL, f"solver incumbent fails the feasibility check ({fam}: {v:.3e}); "
                                        "no solution written")
    write_solution(out, sol, cat, s, cfg, res)
    print(summary_text(sol, cat, cfg, res), end="")
    if res.status != "optimal_within_gap":
        print(f"solver limit reached ({res.status}); best incumbent reported", file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


def write_solution(out: Path, sol: PlanSolution, cat: Catalog, s, cfg: PlanningConfig,
                   res: Optional[MilpResult] = None) -> None:
    (out / "solution.json").write_text(sol.to_json() + "\n", encoding="utf-8")
    (out / "schedule.csv").write_text(schedule_csv(sol, cat, s), encoding="utf-8")
    (out / "summary.txt").write_text(summary_text(sol, cat, cfg, res), encoding="utf-8")


def stage_report(run_dir: Path, run: RunConfig, out: Path, man: Manifest, catalog: Optional[str],
                 scenario: Optional[str]) -> None:
    sol_path = run_dir / "solution.json"
    if not sol_path.is_file():
        raise FileNotFoundError(f"missing artifact {sol_path}")
    if scenario is None:
        mpath = run_dir / "manifest.json"
        try:
            scenario = json.loads(mpath.read_text(encoding="utf-8"))["inputs"]["scenario"]["path"]
        except (OSError, KeyError, json.JSONDecodeError):
            raise FileNotFoundError(f"no scenario given and none recorded in {mpath}") from None
    man.add_input("solution", sol_path)
    cat, s = _load_problem(Path(scenario), run, man, catalog)
    man.start("report")
    sol = PlanSolution.from_dict(json.loads(sol_path.read_text(encoding="utf-8")))
    if tuple(sol.shape) != tuple(s.shape):
        raise ScenarioError(f"solution grid {tuple(sol.shape)} does not match scenario grid {s.shape}")
    missing = [i for i in sol.installed if i not in cat.equipment_ids]
    if missing:
        raise CatalogError(f"solution refers to equipment missing from the catalog: {', '.join(missing)}")
    out.mkdir(parents=True, exist_ok=True)
    el = run.planning.electricity
    files = {
        "dispatch.csv": balance_csv(sol, cat, s, el),
        "heat_balance.csv": balance_csv(sol, cat, s, "heat") if "heat" in cat.resource_ids else None,
        "demand.csv": demand_csv(s),
        "weather.csv": weather_csv(s),
        "soc.csv": soc_csv(sol),
    }
    for name, text in files.items():
        if text is not None:
            (out / name).write_text(text, encoding="utf-8")
    man.stop("report")
    print(f"report written to {out}")


# -- argument parsing ------------------------------------------------------

def _globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="TOML run configuration")
    p.add_argument("--out", default=argparse.SUPPRESS if suppress else ".", help="output directory")
    p.add_argument("--seed", type=int, default=d, help="random seed (overrides the config)")
    p.add_argument("--verbose", "-v", action="count", default=argparse.SUPPRESS if suppress else 0)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--optca", type=float, help="absolute gap tolerance (default 1e-2)")
    g.add_argument("--optcr", type=float, help="relative gap tolerance (default 1e-2)")
    g.add_argument("--time-limit", type=float, dest="time_limit")
    g.add_argument("--node-limit", type=int, dest="node_limit")
    g.add_argument("--threads", type=int)
    g.add_argument("--branching", choices=("most_fractional", "pseudo_cost"))
    g.add_argument("--node-selection", choices=("best_bound", "depth_first"), dest="node_selection")
    g.add_argument("--lp", choices=("simplex", "highs"), help="LP engine for node relaxations")


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--likelihood", choices=("likely", "mid", "mid_likely", "unlikely"))
    p.add_argument("--confidence", type=float, help="prediction-interval confidence in (0, 1)")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gridplan", description="Microgrid design and operation planning.")
    _globals(p, False)
    p.add_argument("--version", action="version", version=f"gridplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        _globals(sp, True)
        return sp

    sp = cmd("fit", "fit the empirical models to a history file")
    sp.add_argument("--history", required=True)
    sp.add_argument("--kinds", help="comma-separated model kinds (default: all seven)")
    sp.add_argument("--confidence", type=float)

    sp = cmd("sample", "sample a scenario from fitted models")
    sp.add_argument("--models", required=True)
    sp.add_argument("--catalog")
    _scenario_flags(sp)

    sp = cmd("build", "build the planning MILP and export it as MPS")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--catalog")

    sp = cmd("solve", "build and solve the planning MILP")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--catalog")
    _solver_flags(sp)

    sp = cmd("report", "write plot-ready CSVs for a solved run")
    sp.add_argument("--run", help="directory holding solution.json (default: --out)")
    sp.add_argument("--scenario")
    sp.add_argument("--catalog")

    sp = cmd("pipeline", "fit, sample, solve and report in one go")
    sp.add_argument("--history", required=True)
    sp.add_argument("--catalog")
    _scenario_flags(sp)
    _solver_flags(sp)
    return p


def _apply_overrides(run: RunConfig, args: argparse.Namespace) -> None:
    if args.seed is not None:
        run.seed = args.seed
    if getattr(args, "likelihood", None):
        run.likelihood = normalize_likelihood(args.likelihood)
    if getattr(args, "confidence", None) is not None:
        if not 0 < args.confidence < 1:
            raise CliFailure(EXIT_USAGE, "--confidence must lie in (0, 1)")
        run.confidence = args.confidence
    if getattr(args, "kinds", None):
        kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
        unknown = [k for k in kinds if k not in ALL_KINDS]
        if unknown:
            raise CliFailure(EXIT_USAGE, f"unknown model kind {unknown[0]!r}")
        run.kinds = kinds


def _record_inputs(args: argparse.Namespace, run: RunConfig, man: Manifest) -> None:
    """Digest every input named on the command line before any stage runs."""
    if args.config:
        man.add_input("config", Path(args.config))
    for role in ("history", "models", "scenario"):
        v = getattr(args, role, None)
        if v:
            man.add_input(role, Path(v))
    if hasattr(args, "catalog"):
        man.add_input("catalog", Path(args.catalog or run.catalog_dir or default_catalog_dir()))
    if args.command == "report":
        sol = Path(args.run or args.out) / "solution.json"
        if sol.is_file():
            man.add_input("solution", sol)


def _manifest_dir(out: Path, command: str) -> Path:
    # report runs next to a solve run; keep the solve manifest intact
    return out / "report" if command == "report" else out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    man: Optional[Manifest] = None
    code = EXIT_INTERNAL
    try:
        run = load_run_config(args.config)
        _apply_overrides(run, args)
        man = Manifest(_manifest_dir(out, args.command), args.command, argv, run)
        _record_inputs(args, run, man)
        man.write()
        code = _dispatch(args, run, out, man)
    except CliFailure as e:
        print(f"gridplan: {e}", file=sys.stderr)
        code = e.code
    except DATA_ERRORS as e:
        print(f"gridplan: {e}", file=sys.stderr)
        code = EXIT_DATA
    except SolverError as e:
        print(f"gridplan: solver error: {e}", file=sys.stderr)
        code = EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        code = EXIT_INTERNAL
    finally:
        if man is None:
            try:
                man = Manifest(_manifest_dir(out, args.command), args.command, argv, None)
            except Exception:
                man = None
        if man is not None:
            man.doc["exit_code"] = code
            man.doc["status"] = "ok" if code == EXIT_OK else "failed"
            try:
                man.write()
            except OSError as e:
                print(f"gridplan: cannot write manifest: {e}", file=sys.stderr)
    return code


def _dispatch(args: argparse.Namespace, run: RunConfig, out: Path, man: Manifest) -> int:
    c = args.command
    if c == "fit":
        stage_fit(Path(args.history), run, out, man)
    elif c == "sample":
        stage_sample(Path(args.models), run, out, man, args.catalog)
    elif c == "build":
        stage_build(Path(args.scenario), run, out, man, args.catalog)
    elif c == "solve":
        return stage_solve(Path(args.scenario), run, out, man, args.catalog, _solver_options(run, args))
    elif c == "report":
        stage_report(Path(args.run) if args.run else out, run, out / "report", man, args.catalog,
                     args.scenario)
    elif c == "pipeline":
        opts = _solver_options(run, args)
        stage_fit(Path(args.history), run, out, man)
        scen = stage_sample(out / "models.json", run, out, man, args.catalog)
        code = stage_solve(scen, run, out, man, args.catalog, opts)
        stage_report(out, run, out / "report", man, args.catalog, str(scen))
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
