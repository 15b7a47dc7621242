"""Fixed-format MPS writer and a reader for the same subset.

Names come from the model's index maps. When any name does not fit the 8-character
fixed-format field (or contains blanks), every name of that kind is replaced by a short
hash and the mapping is returned alongside the text.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import MilpModel

FIELD = 8


class MpsError(ValueError):
    pass


@dataclass
class MpsExport:
    text: str
    columns: dict[str, str] = field(default_factory=dict)  # short -> original, only when hashed
    rows: dict[str, str] = field(default_factory=dict)

    def __str__(self) -> str:
        return self.text


def _fits(name: str) -> bool:
    return 0 < len(name) <= FIELD and " " not in name and name.isascii()


def _short_names(names: list[str], prefix: str) -> tuple[list[str], dict[str, str]]:
    if all(_fits(n) for n in names) and len(set(names)) == len(names):
        return list(names), {}
    out, seen, mapping = [], set(), {}
    for n in names:
        h = hashlib.blake2b(n.encode(), digest_size=8).hexdigest()
        cand = prefix + h[: FIELD - 1]
        salt = 0
        while cand in seen:
            salt += 1
            h = hashlib.blake2b(f"{n}#{salt}".encode(), digest_size=8).hexdigest()
            cand = prefix + h[: FIELD - 1]
        seen.add(cand)
        out.append(cand)
        mapping[cand] = n
    return out, mapping


def _num(x: float) -> str:
    s = repr(float(x))
    if len(s) > 12:
        s = f"{x:.12g}"
        if len(s) > 12:
            s = f"{x:.6e}"
    return s


def _line(f1: str, f2: str, f3: str, f4: str = "", f5: str = "", f6: str = "") -> str:
    # columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        s += f"   {f5:<8}  {f6:>12}"
    return s.rstrip()


def export_mps(m: MilpModel, name: str = "GRIDPLAN") -> MpsExport:
    if m.n_vars == 0:
        raise MpsError("no variables")
    cols, cmap = _short_names(list(m.names), "C")
    rnames = list(m.row_names) if len(m.row_names) == m.n_rows else [f"r{i}" for i in range(m.n_rows)]
    rows, rmap = _short_names(rnames, "R")
    obj = "COST" if "COST" not in rows else "OBJ_ROW"
    out = [f"NAME          {name[:FIELD]}", "ROWS", f" N  {obj}"]
    for r, s in zip(rows, m.sense):
        out.append(f" {s}  {r}")
    out.append("COLUMNS")
    A = m.A.tocsc()
    in_int = False
    for j in range(m.n_vars):
        if m.binary[j] and not in_int:
            out.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not m.binary[j] and in_int:
            out.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = []
        if m.c[j] != 0:
            entries.append((obj, m.c[j]))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries += [(rows[i], v) for i, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        if not entries:
            entries = [(obj, 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            if len(pair) == 2:
                out.append(_line("", cols[j], pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])))
            else:
                out.append(_line("", cols[j], pair[0][0], _num(pair[0][1])))
    if in_int:
        out.append("    MARKER                 'MARKER'                 'INTEND'")
    out.append("RHS")
    for r, v in zip(rows, m.rhs):
        if v != 0:
            out.append(_line("", "RHS", r, _num(v)))
    if m.obj_offset:
        out.append(_line("", "RHS", obj, _num(-m.obj_offset)))
    out.append("BOUNDS")
    for j in range(m.n_vars):
        lo, hi = m.lb[j], m.ub[j]
        c = cols[j]
        if m.binary[j] and lo == 0 and hi == 1:
            out.append(_line("BV", "BND", c))
            continue
        if lo == hi:
            out.append(_line("FX", "BND", c, _num(lo)))
            continue
        if math.isinf(lo) and math.isinf(hi):
            out.append(_line("FR", "BND", c))
            continue
        if math.isinf(lo):
            out.append(_line("MI", "BND", c))
        elif lo != 0:
            out.append(_line("LO", "BND", c, _num(lo)))
        if math.isfinite(hi):
            out.append(_line("UP", "BND", c, _num(hi)))
    out.append("ENDATA")
    return MpsExport("\n".join(out) + "\n", cmap, rmap)


def read_mps(text: str) -> MilpModel:
    """Parse fixed or free MPS (whitespace-separated fields, names without blanks)."""
    section = None
    obj = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    col_order: list[str] = []
    col_pos: dict[str, int] = {}
    entries: list[tuple[int, str, float]] = []
    integer: set[str] = set()
    rhs: dict[str, float] = {}
    bounds: list[tuple[str, str, float]] = []
    in_int = False
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            section = raw.split()[0].upper()
            if section == "ENDATA":
                break
            continue
        tok = raw.split()
        if section == "ROWS":
            s, r = tok[0].upper(), tok[1]
            if s == "N":
                obj = obj or r
            else:
                row_sense[r] = s
                row_order.append(r)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1].strip("'") == "MARKER":
                in_int = tok[2].strip("'") == "INTORG"
                continue
            c = tok[0]
            if c not in col_pos:
                col_pos[c] = len(col_order)
                col_order.append(c)
            if in_int:
                integer.add(c)
            for k in range(1, len(tok) - 1, 2):
                entries.append((col_pos[c], tok[k], float(tok[k + 1])))
        elif section == "RHS":
            for k in range(1, len(tok) - 1, 2):
                rhs[tok[k]] = float(tok[k + 1])
        elif section == "BOUNDS":
            kind = tok[0].upper()
            val = float(tok[3]) if len(tok) > 3 else math.nan
            bounds.append((kind, tok[2], val))
        elif section == "RANGES":
            raise MpsError("RANGES section is not supported")
    n, m = len(col_order), len(row_order)
    if n == 0:
        raise MpsError("no variables")
    rpos = {r: i for i, r in enumerate(row_order)}
    c = np.zeros(n)
    ri, ci, vv = [], [], []
    for j, r, v in entries:
        if r == obj:
            c[j] += v
        elif r in rpos:
            ri.append(rpos[r])
            ci.append(j)
            vv.append(v)
        else:
            raise MpsError(f"unknown row {r!r} in COLUMNS")
    A = sp.csr_matrix((vv, (ri, ci)), shape=(m, n))
    lb, ub = np.zeros(n), np.full(n, np.inf)
    binary = np.zeros(n, dtype=bool)
    for kind, cname, val in bounds:
        j = col_pos[cname]
        if kind == "UP":
            ub[j] = val
        elif kind == "LO":
            lb[j] = val
        elif kind == "FX":
            lb[j] = ub[j] = val
        elif kind == "FR":
            lb[j], ub[j] = -np.inf, np.inf
        elif kind == "MI":
            lb[j] = -np.inf
        elif kind == "PL":
            ub[j] = np.inf
        elif kind == "BV":
            lb[j], ub[j] = 0.0, 1.0
            binary[j] = True
        else:
            raise MpsError(f"unsupported bound type {kind}")
    for name in integer:
        j = col_pos[name]
        if lb[j] >= 0 and ub[j] <= 1:
            binary[j] = True
    model = MilpModel(list(col_order), lb, ub, binary, A,
                      np.array([row_sense[r] for r in row_order], dtype="<U1"),
                      np.array([rhs.get(r, 0.0) for r in row_order]), c, list(row_order),
                      obj_offset=-rhs.get(obj, 0.0) if obj else 0.0)
    return model
