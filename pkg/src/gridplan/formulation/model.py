"""In-memory MILP container shared by the formulation and the solver."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

SENSES = ("L", "E", "G")  # <=, =, >=


@dataclass
class MilpModel:
    """min c.x + offset  s.t.  A x (sense) rhs,  lb <= x <= ub,  x[binary] in {0,1}.

    ``var_index`` / ``row_index`` map a family name (``"p"``, ``"balance"`` ...)
    to a dict from semantic key tuples to positions.
    """

    names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    c: np.ndarray
    row_names: list[str] = field(default_factory=list)
    obj_offset: float = 0.0
    var_index: dict[str, dict[tuple, int]] = field(default_factory=dict)
    row_index: dict[str, dict[tuple, int]] = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.lb)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_binary(self) -> int:
        return int(self.binary.sum())

    def var(self, family: str, *key) -> int:
        return self.var_index[family][tuple(key)]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.obj_offset)

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.where(self.sense == "L", -np.inf, self.rhs)
        hi = np.where(self.sense == "G", np.inf, self.rhs)
        return lo.astype(float), hi.astype(float)

    def violations(self, x: np.ndarray) -> dict[str, float]:
        """Max absolute violation of rows, bounds and integrality at x."""
        ax = self.A @ x
        lo, hi = self.row_bounds()
        row = np.maximum(lo - ax, ax - hi)
        bnd = np.maximum(self.lb - x, x - self.ub)
        xi = x[self.binary]
        integ = np.abs(xi - np.round(xi))
        return {
            "rows": float(row.max(initial=0.0)),
            "bounds": float(bnd.max(initial=0.0)),
            "integrality": float(integ.max(initial=0.0)),
        }

    def family_sizes(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.var_index.items()}

    def row_family_sizes(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.row_index.items()}

    @classmethod
    def from_arrays(cls, c, A, sense, rhs, lb=None, ub=None, binary=None,
                    names=None) -> "MilpModel":
        c = np.asarray(c, dtype=float)
        n = c.size
        if A is None or (not sp.issparse(A) and np.size(A) == 0):
            A = sp.csr_matrix((0, n))
        else:
            A = sp.csr_matrix(A if sp.issparse(A) else np.atleast_2d(np.asarray(A, dtype=float)), dtype=float)
        if A.shape[1] != n:
            raise ValueError(f"A has {A.shape[1]} columns, objective has {n}")
        m = A.shape[0]
        if isinstance(sense, str):
            sense = [sense] * m
        sense = np.array([{"<=": "L", "==": "E", "=": "E", ">=": "G"}.get(s, s) for s in sense], dtype="<U1")
        lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
        ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
        binary = np.zeros(n, dtype=bool) if binary is None else np.asarray(binary, dtype=bool)
        names = names or [f"x{j}" for j in range(n)]
        return cls(list(names), lb.copy(), ub.copy(), binary.copy(), A, sense,
                   np.asarray(rhs, dtype=float).reshape(m), c.copy(),
                   [f"r{i}" for i in range(m)])


class ModelBuilder:
    """Incremental construction of a MilpModel with semantic index maps."""

    def __init__(self) -> None:
        self._names: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._bin: list[bool] = []
        self._c: list[float] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._sense: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self.offset = 0.0
        self.var_index: dict[str, dict[tuple, int]] = {}
        self.row_index: dict[str, dict[tuple, int]] = {}

    @staticmethod
    def _label(family: str, key: Sequence[Hashable]) -> str:
        return family + ("[" + ",".join(str(k) for k in key) + "]" if key else "")

    def add_var(self, family: str, key: tuple = (), lb: float = 0.0, ub: float = np.inf,
                binary: bool = False, cost: float = 0.0) -> int:
        j = len(self._names)
        idx = self.var_index.setdefault(family, {})
        if key in idx:
            raise KeyError(f"duplicate variable {family}{key}")
        idx[key] = j
        self._names.append(self._label(family, key))
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._bin.append(binary)
        self._c.append(float(cost))
        return j

    def add_cost(self, j: int, cost: float) -> None:
        self._c[j] += cost

    def add_row(self, family: str, key: tuple, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise ValueError(f"bad sense {sense!r}")
        i = len(self._sense)
        idx = self.row_index.setdefault(family, {})
        if key in idx:
            raise KeyError(f"duplicate row {family}{key}")
        idx[key] = i
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[int, float] = {}
        for j, v in items:
            acc[j] = acc.get(j, 0.0) + v
        for j, v in acc.items():
            if v != 0.0:
                self._rows.append(i)
                self._cols.append(j)
                self._vals.append(float(v))
        self._sense.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(self._label(family, key))
        return i

    def build(self) -> MilpModel:
        n, m = len(self._names), len(self._sense)
        if self._cols and max(self._cols) >= n:
            raise ValueError("constraint references undeclared variable")
        A = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(m, n))
        return MilpModel(
            names=list(self._names), lb=np.array(self._lb), ub=np.array(self._ub),
            binary=np.array(self._bin, dtype=bool), A=A,
            sense=np.array(self._sense, dtype="<U1"), rhs=np.array(self._rhs),
            c=np.array(self._c), row_names=list(self._row_names), obj_offset=self.offset,
            var_index=self.var_index, row_index=self.row_index,
        )
