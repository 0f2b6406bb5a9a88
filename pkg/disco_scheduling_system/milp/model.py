"""
Canonical sparse MILP representation

Models are assembled through ``MilpBuilder``, which preserves insertion order
so that the same inputs always give the same column and row numbering, and are
frozen into an immutable ``MilpModel``.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional, Tuple, Iterable, Union

import numpy as np
from scipy import sparse

from ..shared.exceptions import ModelBuildError

INF = math.inf

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"

SENSES = ("<=", ">=", "=")

Coefficients = Union[Dict[int, float], Iterable[Tuple[int, float]]]


@dataclass(frozen=True)
class Column:
    name: str
    lower: float = 0.0
    upper: float = INF
    objective: float = 0.0
    integer: bool = False


@dataclass(frozen=True)
class Row:
    name: str
    sense: str
    rhs: float


@dataclass(frozen=True)
class MilpModel:
    """Immutable sparse mixed-integer linear program"""
    name: str
    sense: str  # "max" | "min"
    columns: Tuple[Column, ...]
    rows: Tuple[Row, ...]
    entries: Tuple[Tuple[int, int, float], ...]  # (row, col, value), sorted
    objective_constant: float = 0.0

    @property
    def num_columns(self) -> int:
        return len(self.columns)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    @property
    def num_binaries(self) -> int:
        return sum(1 for col in self.columns if col.integer)

    @property
    def is_mip(self) -> bool:
        return any(col.integer for col in self.columns)

    def statistics(self) -> Dict[str, int]:
        return {
            'rows': self.num_rows,
            'columns': self.num_columns,
            'binaries': self.num_binaries,
            'nonzeros': len(self.entries)
        }

    def column_index(self) -> Dict[str, int]:
        return {col.name: k for k, col in enumerate(self.columns)}

    def matrix(self) -> sparse.csr_matrix:
        if not self.entries:
            return sparse.csr_matrix((self.num_rows, self.num_columns))
        rows, cols, vals = zip(*self.entries)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.num_rows, self.num_columns))

    def objective_vector(self) -> np.ndarray:
        return np.array([col.objective for col in self.columns], dtype=float)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lower = np.array([col.lower for col in self.columns], dtype=float)
        upper = np.array([col.upper for col in self.columns], dtype=float)
        return lower, upper

    def objective_value(self, values: np.ndarray) -> float:
        return float(self.objective_vector() @ values) + self.objective_constant

    def row_activity(self, values: np.ndarray) -> np.ndarray:
        return self.matrix() @ np.asarray(values, dtype=float)

    def relaxed(self) -> 'MilpModel':
        """Copy with all integrality dropped"""
        columns = tuple(Column(c.name, c.lower, c.upper, c.objective, False) for c in self.columns)
        return MilpModel(self.name, self.sense, columns, self.rows, self.entries,
                         self.objective_constant)


@dataclass
class Solution:
    """Result of a solve or of an imported solution file"""
    status: str
    values: np.ndarray
    objective: float
    row_activity: np.ndarray
    stats: Dict[str, Any] = field(default_factory=dict)
    duals: Optional[np.ndarray] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def has_values(self) -> bool:
        return self.values is not None and self.status in (OPTIMAL, LIMIT)

    def value_map(self, model: MilpModel) -> Dict[str, float]:
        return {col.name: float(v) for col, v in zip(model.columns, self.values)}


class MilpBuilder:
    """Order-preserving collector for columns, rows and objective terms"""

    def __init__(self, name: str = "model"):
        self.name = name
        self._columns: List[Column] = []
        self._column_index: Dict[str, int] = {}
        self._rows: List[Row] = []
        self._row_names: Dict[str, int] = {}
        self._entries: List[Dict[int, float]] = []
        self._objective: Dict[int, float] = {}
        self.objective_constant = 0.0

    @property
    def num_columns(self) -> int:
        return len(self._columns)

    @property
    def num_rows(self) -> int:
        return len(self._rows)

    def add_column(self, name: str, lower: float = 0.0, upper: float = INF,
                   objective: float = 0.0, integer: bool = False) -> int:
        if name in self._column_index:
            raise ModelBuildError(f"duplicate column '{name}'")
        if lower > upper:
            raise ModelBuildError(f"column '{name}' has lower bound {lower} above upper bound {upper}")
        if integer and (lower < 0.0 or upper > 1.0):
            raise ModelBuildError(f"binary column '{name}' must have bounds within [0, 1]")
        self._columns.append(Column(name, float(lower), float(upper), 0.0, integer))
        index = len(self._columns) - 1
        self._column_index[name] = index
        if objective:
            self.add_objective(index, objective)
        return index

    def add_binary(self, name: str) -> int:
        return self.add_column(name, 0.0, 1.0, integer=True)

    def column(self, name: str) -> int:
        return self._column_index[name]

    def has_column(self, name: str) -> bool:
        return name in self._column_index

    def add_objective(self, column: int, coefficient: float):
        self._objective[column] = self._objective.get(column, 0.0) + float(coefficient)

    def add_row(self, name: str, coefficients: Coefficients, sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise ModelBuildError(f"row '{name}' has unknown sense '{sense}'")
        if name in self._row_names:
            raise ModelBuildError(f"duplicate row '{name}'")
        items = coefficients.items() if isinstance(coefficients, dict) else coefficients
        merged: Dict[int, float] = {}
        for col, value in items:
            if not 0 <= col < len(self._columns):
                raise ModelBuildError(f"row '{name}' references unknown column {col}")
            merged[col] = merged.get(col, 0.0) + float(value)
        self._rows.append(Row(name, sense, float(rhs)))
        self._entries.append({c: v for c, v in merged.items() if v != 0.0})
        self._row_names[name] = len(self._rows) - 1
        return len(self._rows) - 1

    def build(self, sense: str = "max") -> MilpModel:
        if sense not in ("max", "min"):
            raise ModelBuildError(f"unknown objective sense '{sense}'")
        columns = tuple(
            Column(c.name, c.lower, c.upper, self._objective.get(k, 0.0), c.integer)
            for k, c in enumerate(self._columns)
        )
        entries = tuple(
            (r, c, v) for r, row in enumerate(self._entries) for c, v in sorted(row.items())
        )
        return MilpModel(self.name, sense, columns, tuple(self._rows), entries,
                         float(self.objective_constant))


def row_violations(model: MilpModel, values: np.ndarray) -> np.ndarray:
    """Non-negative violation of every row at the given point"""
    activity = model.row_activity(values)
    rhs = np.array([row.rhs for row in model.rows], dtype=float)
    violation = np.zeros(model.num_rows)
    for k, row in enumerate(model.rows):
        if row.sense == "<=":
            violation[k] = max(0.0, activity[k] - rhs[k])
        elif row.sense == ">=":
            violation[k] = max(0.0, rhs[k] - activity[k])
        else:
            violation[k] = abs(activity[k] - rhs[k])
    return violation


def verify_solution(model: MilpModel, values: np.ndarray, tolerance: float = 1e-6,
                    integrality_tolerance: float = 1e-6) -> Tuple[Optional[str], float]:
    """Independent feasibility audit; returns the worst violated row/bound and its violation"""
    values = np.asarray(values, dtype=float)
    worst_name, worst = None, 0.0

    if model.num_rows:
        violation = row_violations(model, values)
        k = int(np.argmax(violation))
        if violation[k] > worst:
            worst_name, worst = model.rows[k].name, float(violation[k])

    for col, value in zip(model.columns, values):
        bound_violation = max(col.lower - value, value - col.upper, 0.0)
        if bound_violation > worst:
            worst_name, worst = f"bound:{col.name}", float(bound_violation)
        if col.integer:
            frac = abs(value - round(value))
            if frac > integrality_tolerance and frac > worst:
                worst_name, worst = f"integrality:{col.name}", float(frac)

    if worst <= tolerance:
        return None, worst
    return worst_name, worst
