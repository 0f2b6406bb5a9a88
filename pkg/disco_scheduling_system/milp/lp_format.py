"""
CPLEX LP text export and plain-text solution import

The exported file is byte-deterministic: columns and rows keep model order and
numbers are written with Python's shortest round-trip float repr. The solution
format is one ``name value`` pair per line with ``#`` comments.
"""

import logging
import math
import re
from typing import Dict, List, Tuple

import numpy as np

from ..shared.exceptions import (
    ModelBuildError, SolutionImportError, UnknownColumnError, MissingColumnError,
    InfeasibleSolutionError
)
from .model import MilpModel, Solution, OPTIMAL, verify_solution

logger = logging.getLogger(__name__)

LINE_WIDTH = 250
_UNSAFE = re.compile(r"[^A-Za-z0-9_.\[\]]")


def lp_name(name: str) -> str:
    """Map a model name onto a token the LP grammar accepts"""
    safe = _UNSAFE.sub("_", name)
    # Leading digits, periods and e/E read as numbers
    if not safe or safe[0].isdigit() or safe[0] in ".eE":
        safe = "x_" + safe
    return safe


def _name_table(names: List[str], kind: str) -> List[str]:
    mapped = [lp_name(n) for n in names]
    seen: Dict[str, str] = {}
    for original, safe in zip(names, mapped):
        if safe in seen and seen[safe] != original:
            raise ModelBuildError(f"{kind} names '{seen[safe]}' and '{original}' collide as '{safe}'")
        seen[safe] = original
    return mapped


def _number(value: float) -> str:
    if math.isinf(value):
        return "+infinity" if value > 0 else "-infinity"
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def _terms(pairs: List[Tuple[float, str]]) -> List[str]:
    tokens = []
    for k, (coef, name) in enumerate(pairs):
        sign = "-" if coef < 0 else "+"
        magnitude = _number(abs(coef))
        body = name if magnitude == "1" else f"{magnitude} {name}"
        if k == 0:
            tokens.append(body if sign == "+" else f"- {body}")
        else:
            tokens.append(f"{sign} {body}")
    return tokens


def _wrap(head: str, tokens: List[str]) -> List[str]:
    lines, current = [], head
    for token in tokens:
        if len(current) + len(token) + 1 > LINE_WIDTH and current.strip():
            lines.append(current)
            current = "   "
        current = f"{current} {token}" if current.strip() else f"{current}{token}"
    lines.append(current)
    return lines


def render_model(model: MilpModel) -> str:
    """LP text of a model"""
    col_names = _name_table([c.name for c in model.columns], "column")
    row_names = _name_table([r.name for r in model.rows], "row")

    out = [f"\\ Model: {model.name}",
           f"\\ Objective constant: {_number(model.objective_constant)}",
           "Maximize" if model.sense == "max" else "Minimize"]

    objective = [(c.objective, col_names[k]) for k, c in enumerate(model.columns) if c.objective != 0.0]
    out.extend(_wrap(" obj:", _terms(objective)) if objective else [" obj: 0"])

    out.append("Subject To")
    by_row: List[List[Tuple[float, str]]] = [[] for _ in model.rows]
    for r, c, v in model.entries:
        by_row[r].append((v, col_names[c]))
    for k, row in enumerate(model.rows):
        pairs = by_row[k]
        if not pairs:
            if not model.columns:
                raise ModelBuildError(f"row '{row.name}' is empty and the model has no columns")
            pairs = [(0.0, col_names[0])]
            tokens = [f"0 {col_names[0]}"]
        else:
            tokens = _terms(pairs)
        out.extend(_wrap(f" {row_names[k]}:", tokens + [row.sense, _number(row.rhs)]))

    out.append("Bounds")
    for k, col in enumerate(model.columns):
        name = col_names[k]
        lo, hi = col.lower, col.upper
        if col.integer and lo == 0.0 and hi == 1.0:
            continue
        if lo == hi:
            out.append(f" {name} = {_number(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            out.append(f" {name} free")
        elif math.isinf(hi):
            if lo != 0.0:
                out.append(f" {name} >= {_number(lo)}")
        else:
            out.append(f" {_number(lo)} <= {name} <= {_number(hi)}")

    binaries = [col_names[k] for k, col in enumerate(model.columns) if col.integer]
    if binaries:
        out.append("Binaries")
        out.extend(_wrap("", binaries))
    out.append("End")
    return "\n".join(out) + "\n"


def export_model(model: MilpModel, path: str) -> str:
    """Write the model as a CPLEX LP file"""
    text = render_model(model)
    with open(path, 'w', newline='\n') as f:
        f.write(text)
    logger.info(f"Exported model {model.name} to {path}")
    return path


def write_solution(model: MilpModel, solution: Solution, path: str) -> str:
    """Write column values in the import format"""
    col_names = _name_table([c.name for c in model.columns], "column")
    lines = [f"# model {model.name}",
             f"# status {solution.status}",
             f"# objective {_number(solution.objective)}"]
    for name, value in zip(col_names, solution.values):
        lines.append(f"{name} {_number(float(value))}")
    with open(path, 'w', newline='\n') as f:
        f.write("\n".join(lines) + "\n")
    return path


def import_solution(model: MilpModel, path: str, tolerance: float = 1e-5) -> Solution:
    """Read a ``name value`` solution file and recheck it against the model"""
    col_names = _name_table([c.name for c in model.columns], "column")
    index: Dict[str, int] = {}
    for k, col in enumerate(model.columns):
        index[col.name] = k
        index[col_names[k]] = k

    values = np.full(model.num_columns, np.nan)
    try:
        with open(path, 'r') as f:
            for number, raw in enumerate(f, start=1):
                line = raw.split('#', 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise SolutionImportError(f"{path}:{number}: expected 'name value', got '{line}'")
                name, text = parts
                if name not in index:
                    raise UnknownColumnError(name)
                try:
                    values[index[name]] = float(text)
                except ValueError:
                    raise SolutionImportError(f"{path}:{number}: '{text}' is not a number")
    except OSError as e:
        raise SolutionImportError(f"cannot read solution file {path}: {e}")

    missing = np.flatnonzero(np.isnan(values))
    if missing.size:
        raise MissingColumnError(model.columns[int(missing[0])].name)

    worst_name, worst = verify_solution(model, values, tolerance, tolerance)
    if worst_name is not None:
        raise InfeasibleSolutionError(worst_name, worst)

    logger.info(f"Imported solution for {model.name} from {path} (max violation {worst:.2e})")
    return Solution(OPTIMAL, values, model.objective_value(values), model.row_activity(values),
                    {'backend': 'export', 'max_violation': worst})
