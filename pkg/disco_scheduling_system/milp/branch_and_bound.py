"""
Best-bound branch and bound over binary columns

Nodes are evaluated when created, so every open node carries its LP bound.
The queue orders by bound, ties first-in first-out; branching picks the most
fractional binary, ties by lowest column index.
"""

import heapq
import itertools
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..shared.exceptions import ModelBuildError
from .highs import solve_highs
from .model import MilpModel, Solution, OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT
from .simplex import DenseLp, solve_dense

logger = logging.getLogger(__name__)


@dataclass
class SolveOptions:
    backend: str = "embedded"  # "embedded" | "highs"
    mip_gap: float = 1e-6  # relative
    absolute_gap: float = 1e-6
    node_limit: int = 100000
    time_limit: float = 600.0
    integrality_tolerance: float = 1e-6


def _most_fractional(x: np.ndarray, integer_columns: np.ndarray, tolerance: float) -> Optional[int]:
    best, best_score = None, tolerance
    for j in integer_columns:
        frac = x[j] - np.floor(x[j])
        score = min(frac, 1.0 - frac)
        if score > best_score:
            best, best_score = int(j), score
    return best


def solve_milp(model: MilpModel, options: SolveOptions = None) -> Solution:
    """Solve a model with binaries (general integers are not supported)"""
    options = options or SolveOptions()
    if options.backend == "highs":
        return solve_highs(model, options.mip_gap, options.time_limit, options.node_limit)

    for col in model.columns:
        if col.integer and (col.lower < 0.0 or col.upper > 1.0):
            raise ModelBuildError(f"column '{col.name}' is a general integer; only binaries are supported")

    started = time.time()
    lp = DenseLp.from_model(model)
    integer_columns = np.array([k for k, col in enumerate(model.columns) if col.integer], dtype=int)
    counter = itertools.count()
    iterations = 0
    nodes = 0
    warnings = []

    def evaluate(lower, upper):
        nonlocal iterations, nodes
        result = solve_dense(lp, lower, upper)
        iterations += result.iterations
        nodes += 1
        for warning in result.warnings:
            if warning not in warnings:
                warnings.append(warning)
        return result

    root = evaluate(lp.lower.copy(), lp.upper.copy())
    if root.status in (INFEASIBLE, UNBOUNDED):
        stats = {'backend': 'embedded', 'nodes': nodes, 'iterations': iterations,
                 'wall_time': time.time() - started}
        return Solution(root.status, None, np.nan, None, stats, warnings=warnings)

    incumbent_x, incumbent_value = None, np.inf
    heap = []
    status = OPTIMAL

    def consider(result, lower, upper):
        nonlocal incumbent_x, incumbent_value
        if result.status != OPTIMAL or result.value >= incumbent_value:
            return
        branch_column = _most_fractional(result.x, integer_columns, options.integrality_tolerance)
        if branch_column is None:
            incumbent_x, incumbent_value = result.x, result.value
        else:
            heapq.heappush(heap, (result.value, next(counter), lower, upper, branch_column))

    if root.status == LIMIT:
        status = LIMIT
    else:
        consider(root, lp.lower.copy(), lp.upper.copy())

    best_bound = root.value if root.status == OPTIMAL else -np.inf
    while heap:
        bound, _, lower, upper, j = heap[0]
        best_bound = bound
        gap = incumbent_value - bound
        if gap <= max(options.absolute_gap, options.mip_gap * abs(incumbent_value)):
            break
        if nodes >= options.node_limit or time.time() - started > options.time_limit:
            status = LIMIT
            break
        heapq.heappop(heap)
        for fixed in (0.0, 1.0):
            child_lower, child_upper = lower.copy(), upper.copy()
            child_lower[j] = child_upper[j] = fixed
            consider(evaluate(child_lower, child_upper), child_lower, child_upper)
    else:
        best_bound = incumbent_value

    if incumbent_x is not None and best_bound > incumbent_value + 1e-7 * max(1.0, abs(incumbent_value)):
        warnings.append(f"bound {best_bound:.12g} exceeds incumbent {incumbent_value:.12g}")

    wall = time.time() - started
    gap = incumbent_value - best_bound if incumbent_x is not None else np.inf
    stats = {
        'backend': 'embedded',
        'nodes': nodes,
        'iterations': iterations,
        'wall_time': wall,
        'gap': float(abs(gap)) if np.isfinite(gap) else np.inf,
        'best_bound': float(lp.sign * best_bound + lp.constant) if np.isfinite(best_bound) else None
    }

    if incumbent_x is None:
        final_status = LIMIT if status == LIMIT else INFEASIBLE
        return Solution(final_status, None, np.nan, None, stats, warnings=warnings)

    objective = model.objective_value(incumbent_x)
    logger.debug(f"{model.name}: branch and bound finished with {nodes} nodes, objective {objective:.6f}")
    return Solution(status, incumbent_x, objective, model.row_activity(incumbent_x), stats,
                    warnings=warnings)
