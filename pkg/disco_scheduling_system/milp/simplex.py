"""
Dense two-phase tableau simplex for desk-scale LPs

Columns are shifted onto their finite bound (x = lo + y or x = hi - y), free
columns are split, and finite upper bounds become explicit rows. Rows keep an
artificial identity block for the whole solve so that the final tableau holds
B^-1 and the row duals can be read off directly.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..shared.exceptions import NumericalInstabilityError
from .model import MilpModel, Solution, OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-11
INSTABILITY_PIVOT = 1e-10
OPTIMALITY_TOL = 1e-9
FEASIBILITY_TOL = 1e-7
DEGENERATE_SWITCH = 50


@dataclass
class DenseLp:
    """Minimization form of a model: min c.x s.t. A x (sense) b, lower <= x <= upper"""
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: List[str]
    lower: np.ndarray
    upper: np.ndarray
    sign: float  # model objective = sign * (c.x) + constant
    constant: float

    @classmethod
    def from_model(cls, model: MilpModel) -> 'DenseLp':
        sign = -1.0 if model.sense == "max" else 1.0
        lower, upper = model.bounds()
        return cls(
            c=sign * model.objective_vector(),
            A=model.matrix().toarray(),
            b=np.array([row.rhs for row in model.rows], dtype=float),
            senses=[row.sense for row in model.rows],
            lower=lower,
            upper=upper,
            sign=sign,
            constant=model.objective_constant
        )


@dataclass
class LpResult:
    status: str
    x: Optional[np.ndarray]
    value: float  # c.x in minimization form, without constant
    duals: Optional[np.ndarray] = None
    dual_value: float = np.nan
    iterations: int = 0
    warnings: List[str] = field(default_factory=list)


def _pivot(tab: np.ndarray, z: np.ndarray, r: int, j: int):
    tab[r] /= tab[r, j]
    column = tab[:, j].copy()
    column[r] = 0.0
    tab -= np.outer(column, tab[r])
    z -= z[j] * tab[r]


class _Iteration:
    """Pricing and ratio test loop shared by both phases"""

    def __init__(self, tab: np.ndarray, z: np.ndarray, basis: np.ndarray, max_iter: int):
        self.tab = tab
        self.z = z
        self.basis = basis
        self.max_iter = max_iter
        self.iterations = 0
        self.small_pivots = 0

    def run(self, allowed: np.ndarray) -> str:
        bland = False
        degenerate_run = 0
        tab, z, basis = self.tab, self.z, self.basis

        while True:
            if self.iterations >= self.max_iter:
                return LIMIT

            reduced = z[:-1]
            candidates = np.flatnonzero(allowed & (reduced < -OPTIMALITY_TOL))
            if candidates.size == 0:
                return OPTIMAL
            if bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmin(reduced[candidates])])

            column = tab[:, j]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED
            ratios = np.maximum(tab[rows, -1], 0.0) / column[rows]
            best = float(ratios.min())
            ties = rows[ratios <= best + 1e-12 + 1e-9 * abs(best)]
            if bland or ties.size == 1:
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = int(ties[np.argmax(column[ties])])

            if abs(column[r]) < INSTABILITY_PIVOT:
                self.small_pivots += 1
            _pivot(tab, z, r, j)
            basis[r] = j
            self.iterations += 1

            # Bland's rule once the pivots stall
            if best <= 1e-12:
                degenerate_run += 1
                if degenerate_run > DEGENERATE_SWITCH:
                    bland = True
            else:
                degenerate_run = 0


def solve_dense(lp: DenseLp, lower: Optional[np.ndarray] = None,
                upper: Optional[np.ndarray] = None, max_iter: Optional[int] = None) -> LpResult:
    """Solve the LP with optional replacement bounds (used by branch and bound)"""
    lower = lp.lower if lower is None else lower
    upper = lp.upper if upper is None else upper
    m0, n = lp.A.shape

    rhs = lp.b.copy()
    constant = 0.0
    std_columns: List[np.ndarray] = []
    std_costs: List[float] = []
    recover: List[Tuple[float, List[Tuple[int, float]]]] = []
    upper_rows: List[Tuple[int, float]] = []

    for j in range(n):
        lo, hi = lower[j], upper[j]
        column, cost = lp.A[:, j], lp.c[j]
        if lo > hi + FEASIBILITY_TOL:
            return LpResult(INFEASIBLE, None, np.inf)
        if np.isfinite(lo) and np.isfinite(hi) and hi - lo <= 1e-12:
            rhs -= column * lo
            constant += cost * lo
            recover.append((lo, []))
        elif np.isfinite(lo):
            rhs -= column * lo
            constant += cost * lo
            k = len(std_columns)
            std_columns.append(column)
            std_costs.append(cost)
            recover.append((lo, [(k, 1.0)]))
            if np.isfinite(hi):
                upper_rows.append((k, hi - lo))
        elif np.isfinite(hi):
            rhs -= column * hi
            constant += cost * hi
            k = len(std_columns)
            std_columns.append(-column)
            std_costs.append(-cost)
            recover.append((hi, [(k, -1.0)]))
        else:
            k = len(std_columns)
            std_columns.extend([column, -column])
            std_costs.extend([cost, -cost])
            recover.append((0.0, [(k, 1.0), (k + 1, -1.0)]))

    ns = len(std_columns)
    mu = len(upper_rows)
    mt = m0 + mu
    senses = list(lp.senses) + ["<="] * mu

    A_std = np.zeros((mt, ns))
    if ns and m0:
        A_std[:m0] = np.column_stack(std_columns)
    for r, (k, _) in enumerate(upper_rows):
        A_std[m0 + r, k] = 1.0
    b_std = np.concatenate([rhs, [bound for _, bound in upper_rows]]) if mt else np.zeros(0)

    slack_rows = [i for i, sense in enumerate(senses) if sense != "="]
    S = np.zeros((mt, len(slack_rows)))
    for k, i in enumerate(slack_rows):
        S[i, k] = 1.0 if senses[i] == "<=" else -1.0

    flip = np.where(b_std < 0.0, -1.0, 1.0)
    A_std *= flip[:, None]
    S *= flip[:, None]
    b_std = b_std * flip

    n_slack = len(slack_rows)
    art_start = ns + n_slack
    N = art_start + mt
    tab = np.hstack([A_std, S, np.eye(mt), b_std[:, None]])

    # Slack columns with +1 after the sign flip start basic; other rows need an artificial
    basis = np.empty(mt, dtype=int)
    active_art = np.zeros(N, dtype=bool)
    slack_of_row = {i: ns + k for k, i in enumerate(slack_rows)}
    for i in range(mt):
        k = slack_of_row.get(i)
        if k is not None and tab[i, k] > 0.0:
            basis[i] = k
        else:
            basis[i] = art_start + i
            active_art[art_start + i] = True

    if max_iter is None:
        max_iter = 20 * (mt + N) + 1000
    engine = _Iteration(tab, np.zeros(N + 1), basis, max_iter)
    warnings: List[str] = []

    # Phase 1
    if active_art.any():
        art_rows = [i for i in range(mt) if active_art[basis[i]]]
        z = np.zeros(N + 1)
        z[:N] = active_art.astype(float)
        for i in art_rows:
            z -= tab[i]
        engine.z = z
        allowed = np.ones(N, dtype=bool)
        allowed[art_start:] = False
        status = engine.run(allowed)
        if status == LIMIT:
            return LpResult(LIMIT, None, np.inf, iterations=engine.iterations)
        infeasibility = -engine.z[-1]
        if infeasibility > FEASIBILITY_TOL * max(1.0, float(np.abs(b_std).max(initial=0.0))):
            return LpResult(INFEASIBLE, None, np.inf, iterations=engine.iterations)

        # Drive zero-level artificials out of the basis where possible
        for r in range(mt):
            if basis[r] >= art_start:
                row = np.abs(tab[r, :art_start])
                if row.size and row.max() > 1e-9:
                    j = int(np.argmax(row))
                    _pivot(tab, engine.z, r, j)
                    basis[r] = j

    # Phase 2
    c_std = np.zeros(N)
    c_std[:ns] = std_costs
    c_basis = c_std[basis]
    z = np.zeros(N + 1)
    z[:N] = c_std - c_basis @ tab[:, :N]
    z[-1] = -(c_basis @ tab[:, -1])
    engine.z = z
    allowed = np.zeros(N, dtype=bool)
    allowed[:art_start] = True
    status = engine.run(allowed)
    if status != OPTIMAL:
        return LpResult(status, None, -np.inf if status == UNBOUNDED else np.inf,
                        iterations=engine.iterations)

    x_std = np.zeros(N)
    x_std[basis] = tab[:, -1]
    x = np.array([offset + sum(f * x_std[k] for k, f in parts) for offset, parts in recover])
    value = float(lp.c @ x) if n else 0.0

    c_basis = c_std[basis]
    y = c_basis @ tab[:, art_start:art_start + mt] if mt else np.zeros(0)
    dual_value = float(y @ b_std) + constant if mt else constant
    primal_value = float(c_std[:ns] @ x_std[:ns]) + constant
    warnings.extend(audit_termination(primal_value, dual_value, engine.z[:art_start], engine.small_pivots))

    duals = (y * flip)[:m0] if mt else np.zeros(m0)
    return LpResult(OPTIMAL, x, value, duals, dual_value, engine.iterations, warnings)


def audit_termination(primal_value: float, dual_value: float, reduced_costs: np.ndarray,
                      small_pivots: int) -> List[str]:
    """Warnings for a finished phase 2

    Tiny pivots alone only warn; with a failed duality or reduced-cost
    check they raise.
    """
    warnings = []
    if abs(primal_value - dual_value) > 1e-8 * max(1.0, abs(primal_value)):
        warnings.append(f"duality gap at termination: primal {primal_value:.12g} dual {dual_value:.12g}")
    if (np.asarray(reduced_costs) < -1e-7).any():
        warnings.append("dual infeasibility at termination")
    if small_pivots:
        if warnings:
            raise NumericalInstabilityError(f"{small_pivots} pivots below {INSTABILITY_PIVOT:g} and "
                                            + "; ".join(warnings))
        warnings.append(f"numerical instability: {small_pivots} pivots below {INSTABILITY_PIVOT:g}")
    return warnings


def solve_lp(model: MilpModel) -> Solution:
    """Solve the LP relaxation of a model with the embedded simplex"""
    started = time.time()
    lp = DenseLp.from_model(model)
    result = solve_dense(lp)
    wall = time.time() - started

    stats = {'iterations': result.iterations, 'nodes': 0, 'wall_time': wall, 'backend': 'embedded'}
    for warning in result.warnings:
        logger.warning(f"{model.name}: {warning}")

    if result.status != OPTIMAL:
        return Solution(result.status, None, np.nan, None, stats, warnings=result.warnings)

    objective = model.objective_value(result.x)
    stats['dual_objective'] = lp.sign * result.dual_value + model.objective_constant
    duals = lp.sign * result.duals if result.duals is not None else None
    return Solution(OPTIMAL, result.x, objective, model.row_activity(result.x), stats,
                    duals=duals, warnings=result.warnings)
