"""Candidate-equipment pool and resource definitions.

The catalog is read from a directory of CSV files:

``resources.csv``
    id, name, unit, purchasable, import_cap, surplus_cap_fraction
``equipment.csv``
    id, class, rp_min_kw, rp_max_kw, b_min, b_max, alpha0, beta0, gamma0,
    alpha_k, beta_k, gamma_k, p_frac_min, p_frac_max, q_frac_min, q_frac_max
``gen.csv`` / ``cons.csv``
    matrix of per-resource generation / consumption rates at unit power for
    unit time; rows are equipment ids, columns are resource ids
``renewables.csv``
    id, kind (pv|wind), eta, kappa, t_ref, v_cut_in, v_rated, v_cut_out

A blank ``import_cap`` or ``surplus_cap_fraction`` means unbounded.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from importlib import resources as _res
from pathlib import Path
from typing import Iterable, Mapping

EQUIPMENT_CLASSES = ("generator", "storage", "renewable")

EQUIPMENT_COLUMNS = (
    "id", "class", "rp_min_kw", "rp_max_kw", "b_min", "b_max",
    "alpha0", "beta0", "gamma0", "alpha_k", "beta_k", "gamma_k",
    "p_frac_min", "p_frac_max", "q_frac_min", "q_frac_max",
)
RESOURCE_COLUMNS = ("id", "name", "unit", "purchasable", "import_cap", "surplus_cap_fraction")
RENEWABLE_COLUMNS = ("id", "kind", "eta", "kappa", "t_ref", "v_cut_in", "v_rated", "v_cut_out")

# implementation defaults; the source tables give no numbers for these
PV_DEFAULTS = {"eta": 0.18, "kappa": 0.004, "t_ref": 25.0}
WIND_DEFAULTS = {"v_cut_in": 2.5, "v_rated": 11.0, "v_cut_out": 25.0}


class CatalogError(ValueError):
    """Raised when catalog files cannot be parsed or violate the schema."""


@dataclass(frozen=True)
class Resource:
    id: str
    name: str
    unit: str
    purchasable: bool = False
    import_cap: float = math.inf
    surplus_cap_fraction: float = math.inf


@dataclass(frozen=True)
class EquipmentSpec:
    id: str
    cls: str
    rp_min: float
    rp_max: float
    b_min: float = 0.0
    b_max: float = 0.0
    alpha0: float = 0.0
    beta0: float = 0.0
    gamma0: float = 0.0
    alpha_k: float = 0.0
    beta_k: float = 0.0
    gamma_k: float = 0.0
    gen: Mapping[str, float] = field(default_factory=dict)
    cons: Mapping[str, float] = field(default_factory=dict)
    p_frac_min: float = 0.0
    p_frac_max: float = 1.0
    q_frac_min: float = 0.0
    q_frac_max: float = 0.0

    @property
    def is_generator(self) -> bool:
        return self.cls == "generator"

    @property
    def is_storage(self) -> bool:
        return self.cls == "storage"

    @property
    def is_renewable(self) -> bool:
        return self.cls == "renewable"


@dataclass(frozen=True)
class RenewableParams:
    kind: str  # "pv" or "wind"
    eta: float = PV_DEFAULTS["eta"]
    kappa: float = PV_DEFAULTS["kappa"]
    t_ref: float = PV_DEFAULTS["t_ref"]
    v_cut_in: float = WIND_DEFAULTS["v_cut_in"]
    v_rated: float = WIND_DEFAULTS["v_rated"]
    v_cut_out: float = WIND_DEFAULTS["v_cut_out"]


@dataclass(frozen=True)
class Violation:
    subject: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}.{self.field}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)


@dataclass(frozen=True)
class Catalog:
    resources: tuple[Resource, ...]
    equipment: tuple[EquipmentSpec, ...]
    renewable_params: Mapping[str, RenewableParams] = field(default_factory=dict)

    def resource(self, rid: str) -> Resource:
        for r in self.resources:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def unit(self, eid: str) -> EquipmentSpec:
        for e in self.equipment:
            if e.id == eid:
                return e
        raise KeyError(eid)

    @property
    def resource_ids(self) -> list[str]:
        return [r.id for r in self.resources]

    @property
    def equipment_ids(self) -> list[str]:
        return [e.id for e in self.equipment]

    def subset(self, ids: Iterable[str]) -> "Catalog":
        """Catalog restricted to the given equipment ids (order as given)."""
        ids = list(ids)
        eq = tuple(self.unit(i) for i in ids)
        rp = {i: p for i, p in self.renewable_params.items() if i in ids}
        return Catalog(self.resources, eq, rp)

    def with_resources(self, resources: Iterable[Resource]) -> "Catalog":
        return replace(self, resources=tuple(resources))


def default_catalog_dir() -> Path:
    return Path(str(_res.files("gridplan") / "data" / "catalog"))


def load_default_catalog() -> Catalog:
    return load_catalog(default_catalog_dir())


# ---------------------------------------------------------------------------
# parsing

def _read_rows(path: Path, required: Iterable[str]):
    if not path.exists():
        raise CatalogError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise CatalogError(f"{path}:1: missing header row")
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in required if c not in header]
        if missing:
            raise CatalogError(f"{path}:1: missing column(s) {', '.join(missing)}")
        for row in reader:
            yield reader.line_num, {k.strip(): (v or "").strip() for k, v in row.items() if k}


def _num(path, line, col, text, *, blank=None) -> float:
    if text == "":
        if blank is None:
            raise CatalogError(f"{path}:{line}: field '{col}' is empty")
        return blank
    try:
        return float(text)
    except ValueError:
        raise CatalogError(f"{path}:{line}: field '{col}' is not a number: {text!r}") from None


def _bool(path, line, col, text) -> bool:
    t = text.lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no", ""):
        return False
    raise CatalogError(f"{path}:{line}: field '{col}' is not a boolean: {text!r}")


def _read_matrix(path: Path, resource_ids: list[str]) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CatalogError(f"{path}:1: missing header row") from None
        if not header or header[0] != "id":
            raise CatalogError(f"{path}:1: first column must be 'id'")
        for col in header[1:]:
            if col not in resource_ids:
                raise CatalogError(f"{path}:1: column '{col}' is not a declared resource")
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CatalogError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            eid = row[0].strip()
            vals = {col: _num(path, line, col, cell.strip(), blank=0.0)
                    for col, cell in zip(header[1:], row[1:])}
            out[eid] = {k: v for k, v in vals.items() if v != 0.0}
    return out


def load_catalog(directory: str | Path) -> Catalog:
    """Load and validate a catalog directory; raise CatalogError on any problem."""
    d = Path(directory)

    resources = []
    for line, row in _read_rows(d / "resources.csv", RESOURCE_COLUMNS):
        p = d / "resources.csv"
        resources.append(Resource(
            id=row["id"], name=row["name"], unit=row["unit"],
            purchasable=_bool(p, line, "purchasable", row["purchasable"]),
            import_cap=_num(p, line, "import_cap", row["import_cap"], blank=math.inf),
            surplus_cap_fraction=_num(p, line, "surplus_cap_fraction",
                                      row["surplus_cap_fraction"], blank=math.inf),
        ))
    rids = [r.id for r in resources]

    gen = _read_matrix(d / "gen.csv", rids) if (d / "gen.csv").exists() else {}
    cons = _read_matrix(d / "cons.csv", rids) if (d / "cons.csv").exists() else {}

    equipment = []
    p = d / "equipment.csv"
    for line, row in _read_rows(p, EQUIPMENT_COLUMNS):
        cls = row["class"]
        if cls not in EQUIPMENT_CLASSES:
            raise CatalogError(f"{p}:{line}: field 'class' must be one of {EQUIPMENT_CLASSES}, got {cls!r}")
        vals = {c: _num(p, line, c, row[c], blank=0.0) for c in EQUIPMENT_COLUMNS[2:]}
        equipment.append(EquipmentSpec(
            id=row["id"], cls=cls,
            rp_min=vals["rp_min_kw"], rp_max=vals["rp_max_kw"],
            b_min=vals["b_min"], b_max=vals["b_max"],
            alpha0=vals["alpha0"], beta0=vals["beta0"], gamma0=vals["gamma0"],
            alpha_k=vals["alpha_k"], beta_k=vals["beta_k"], gamma_k=vals["gamma_k"],
            gen=gen.get(row["id"], {}), cons=cons.get(row["id"], {}),
            p_frac_min=vals["p_frac_min"], p_frac_max=vals["p_frac_max"],
            q_frac_min=vals["q_frac_min"], q_frac_max=vals["q_frac_max"],
        ))
    if not equipment:
        raise CatalogError(f"{p}: no equipment declared")
    eids = {e.id for e in equipment}
    for name, mat in (("gen.csv", gen), ("cons.csv", cons)):
        for eid in mat:
            if eid not in eids:
                raise CatalogError(f"{d / name}: row '{eid}' is not a declared equipment id")

    renew: dict[str, RenewableParams] = {}
    rpath = d / "renewables.csv"
    if rpath.exists():
        for line, row in _read_rows(rpath, RENEWABLE_COLUMNS):
            kind = row["kind"]
            if kind not in ("pv", "wind"):
                raise CatalogError(f"{rpath}:{line}: field 'kind' must be pv or wind, got {kind!r}")
            defaults = {**PV_DEFAULTS, **WIND_DEFAULTS}
            kw = {c: _num(rpath, line, c, row[c], blank=defaults[c]) for c in RENEWABLE_COLUMNS[2:]}
            renew[row["id"]] = RenewableParams(kind=kind, **kw)

    cat = Catalog(tuple(resources), tuple(equipment), renew)
    report = validate_catalog(cat)
    if not report.ok:
        raise CatalogError("invalid catalog:\n  " + "\n  ".join(str(v) for v in report))
    return cat


def _fmt(x: float) -> str:
    if math.isinf(x):
        return ""
    return repr(float(x)) if x != int(x) else str(int(x))


def write_catalog(cat: Catalog, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rids = cat.resource_ids
    with (d / "resources.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESOURCE_COLUMNS)
        for r in cat.resources:
            w.writerow([r.id, r.name, r.unit, str(r.purchasable).lower(),
                        _fmt(r.import_cap), _fmt(r.surplus_cap_fraction)])
    with (d / "equipment.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(EQUIPMENT_COLUMNS)
        for e in cat.equipment:
            w.writerow([e.id, e.cls] + [_fmt(v) for v in (
                e.rp_min, e.rp_max, e.b_min, e.b_max, e.alpha0, e.beta0, e.gamma0,
                e.alpha_k, e.beta_k, e.gamma_k, e.p_frac_min, e.p_frac_max,
                e.q_frac_min, e.q_frac_max)])
    for name, attr in (("gen.csv", "gen"), ("cons.csv", "cons")):
        with (d / name).open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["id", *rids])
            for e in cat.equipment:
                m = getattr(e, attr)
                w.writerow([e.id] + [_fmt(m.get(n, 0.0)) for n in rids])
    with (d / "renewables.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RENEWABLE_COLUMNS)
        for eid, p in cat.renewable_params.items():
            if p.kind == "pv":
                w.writerow([eid, "pv", _fmt(p.eta), _fmt(p.kappa), _fmt(p.t_ref), "", "", ""])
            else:
                w.writerow([eid, "wind", "", "", "", _fmt(p.v_cut_in), _fmt(p.v_rated), _fmt(p.v_cut_out)])


# ---------------------------------------------------------------------------
# validation

def _finite_nonneg(x: float) -> bool:
    return not math.isnan(x) and x >= 0


def validate_catalog(c: Catalog) -> ValidationReport:
    """Collect every invariant violation; never raises."""
    out: list[Violation] = []
    add = lambda s, f, m: out.append(Violation(s, f, m))  # noqa: E731

    seen: set[str] = set()
    for r in c.resources:
        if r.id in seen:
            add(r.id, "id", "duplicate resource id")
        seen.add(r.id)
        if not _finite_nonneg(r.import_cap):
            add(r.id, "import_cap", f"must be nonnegative, got {r.import_cap}")
        if not _finite_nonneg(r.surplus_cap_fraction):
            add(r.id, "surplus_cap_fraction", f"must be nonnegative, got {r.surplus_cap_fraction}")
    rids = seen

    if not c.equipment:
        add("catalog", "equipment", "no equipment declared")
    eseen: set[str] = set()
    for e in c.equipment:
        s = e.id
        if s in eseen:
            add(s, "id", "duplicate equipment id")
        eseen.add(s)
        if e.cls not in EQUIPMENT_CLASSES:
            add(s, "class", f"unknown class {e.cls!r}")
        if not (0 <= e.rp_min <= e.rp_max):
            add(s, "rp_min", f"require 0 <= rp_min <= rp_max, got {e.rp_min}, {e.rp_max}")
        if not (0 <= e.b_min <= e.b_max):
            add(s, "b_min", f"require 0 <= b_min <= b_max, got {e.b_min}, {e.b_max}")
        if e.is_storage and e.b_max == 0:
            add(s, "b_max", "storage unit must have b_max > 0")
        if not e.is_storage and e.b_max != 0:
            add(s, "b_max", "only storage units may have a capacity")
        if not (0 <= e.p_frac_min <= e.p_frac_max <= 1):
            add(s, "p_frac_min", f"require 0 <= p_frac_min <= p_frac_max <= 1, got {e.p_frac_min}, {e.p_frac_max}")
        if e.is_storage and not (0 <= e.q_frac_min <= e.q_frac_max <= 1):
            add(s, "q_frac_min", f"require 0 <= q_frac_min <= q_frac_max <= 1, got {e.q_frac_min}, {e.q_frac_max}")
        for name in ("alpha0", "beta0", "gamma0", "alpha_k", "beta_k", "gamma_k"):
            v = getattr(e, name)
            if not _finite_nonneg(v):
                add(s, name, f"cost coefficient must be nonnegative, got {v}")
        for attr in ("gen", "cons"):
            for n, v in getattr(e, attr).items():
                if n not in rids:
                    add(s, attr, f"references undeclared resource {n!r}")
                if not _finite_nonneg(v):
                    add(s, attr, f"{attr}[{n}] must be nonnegative, got {v}")
        if e.is_renewable and e.id not in c.renewable_params:
            add(s, "renewable_params", "renewable unit has no pv/wind parameters")

    for eid, p in c.renewable_params.items():
        if eid not in eseen:
            add(eid, "renewable_params", "parameters given for undeclared equipment")
        if p.kind == "pv":
            if not (0 < p.eta <= 1):
                add(eid, "eta", f"require 0 < eta <= 1, got {p.eta}")
            if not p.kappa >= 0:
                add(eid, "kappa", f"require kappa >= 0, got {p.kappa}")
        elif p.kind == "wind":
            if not (0 <= p.v_cut_in < p.v_rated <= p.v_cut_out):
                add(eid, "v_rated", "require 0 <= v_cut_in < v_rated <= v_cut_out")
        else:
            add(eid, "kind", f"unknown renewable kind {p.kind!r}")
    return ValidationReport(tuple(out))
