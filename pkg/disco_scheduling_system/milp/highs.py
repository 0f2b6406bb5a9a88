"""
HiGHS backend through scipy.optimize.milp, for models beyond desk scale
"""

import logging
import time

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import MilpModel, Solution, OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT

logger = logging.getLogger(__name__)

_STATUS = {0: OPTIMAL, 1: LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}


def solve_highs(model: MilpModel, mip_gap: float = 1e-6, time_limit: float = None,
                node_limit: int = None) -> Solution:
    """Solve a model with HiGHS and return a Solution in model sense"""
    started = time.time()
    sign = -1.0 if model.sense == "max" else 1.0
    c = sign * model.objective_vector()
    lower, upper = model.bounds()
    integrality = np.array([1 if col.integer else 0 for col in model.columns])

    constraints = []
    if model.num_rows:
        lb = np.full(model.num_rows, -np.inf)
        ub = np.full(model.num_rows, np.inf)
        for k, row in enumerate(model.rows):
            if row.sense in ("<=", "="):
                ub[k] = row.rhs
            if row.sense in (">=", "="):
                lb[k] = row.rhs
        constraints.append(LinearConstraint(model.matrix(), lb, ub))

    options = {'disp': False, 'mip_rel_gap': mip_gap}
    if time_limit is not None:
        options['time_limit'] = float(time_limit)
    if node_limit is not None:
        options['node_limit'] = int(node_limit)

    result = milp(c, integrality=integrality, bounds=Bounds(lower, upper),
                  constraints=constraints, options=options)
    wall = time.time() - started
    status = _STATUS.get(result.status, LIMIT)
    stats = {
        'backend': 'highs',
        'wall_time': wall,
        'nodes': int(getattr(result, 'mip_node_count', 0) or 0),
        'iterations': 0,
        'gap': float(getattr(result, 'mip_gap', 0.0) or 0.0),
        'message': result.message
    }

    if result.x is None:
        return Solution(status, None, np.nan, None, stats)

    x = np.asarray(result.x, dtype=float)
    return Solution(status, x, model.objective_value(x), model.row_activity(x), stats)
