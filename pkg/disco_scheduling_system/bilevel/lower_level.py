"""
Microgrid operation LP in canonical form

    min  c.x + sum_t price_t * P^MG_t
    s.t. A_eq x  = b_eq
         A_in x <= b_in

Every variable is a free column; all bounds are written as inequality rows so
that each of them carries its own dual and complementarity pair.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from ..shared.exceptions import SolverError
from ..shared.models import Microgrid

logger = logging.getLogger("stage.compiler")

FAMILIES = ("pmg", "pdg", "pil", "pch", "pdch", "soc", "dmg")


@dataclass
class LowerLevelLp:
    """Canonical LP of one lower-level decision maker"""
    name: str
    variables: List[str]
    cost: np.ndarray  # fixed cost coefficients; price columns carry 0 here
    price_columns: List[int]  # column paying price_t in hour t
    A_eq: np.ndarray
    b_eq: np.ndarray
    eq_names: List[str]
    A_in: np.ndarray
    b_in: np.ndarray
    in_names: List[str]
    horizon: int = 0
    families: Dict[str, List[int]] = field(default_factory=dict)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_equalities(self) -> int:
        return len(self.eq_names)

    @property
    def num_inequalities(self) -> int:
        return len(self.in_names)

    def cost_vector(self, prices: Sequence[float]) -> np.ndarray:
        c = self.cost.astype(float).copy()
        for t, j in enumerate(self.price_columns):
            c[j] += prices[t]
        return c

    def objective(self, x: np.ndarray, prices: Sequence[float]) -> float:
        return float(self.cost_vector(prices) @ x)

    def fixed_cost(self, x: np.ndarray) -> float:
        """Objective without the exchange payment"""
        return float(self.cost @ x)

    def residuals(self, x: np.ndarray) -> Tuple[float, float]:
        """Worst equality residual and worst inequality excess"""
        eq = float(np.abs(self.A_eq @ x - self.b_eq).max(initial=0.0))
        ineq = float(np.maximum(self.A_in @ x - self.b_in, 0.0).max(initial=0.0))
        return eq, ineq

    def solve(self, prices: Sequence[float]) -> Tuple[float, np.ndarray]:
        """Direct LP solve with HiGHS, used to verify equilibria"""
        result = linprog(self.cost_vector(prices),
                         A_ub=self.A_in if self.num_inequalities else None,
                         b_ub=self.b_in if self.num_inequalities else None,
                         A_eq=self.A_eq if self.num_equalities else None,
                         b_eq=self.b_eq if self.num_equalities else None,
                         bounds=[(None, None)] * self.num_variables, method='highs')
        if result.status != 0:
            raise SolverError(f"lower-level LP {self.name} failed: {result.message}")
        return float(result.fun), np.asarray(result.x, dtype=float)


class _Rows:
    def __init__(self, n: int):
        self.n = n
        self.rows: List[np.ndarray] = []
        self.rhs: List[float] = []
        self.names: List[str] = []

    def add(self, name: str, coefficients: Dict[int, float], rhs: float):
        row = np.zeros(self.n)
        for j, v in coefficients.items():
            row[j] += v
        self.rows.append(row)
        self.rhs.append(float(rhs))
        self.names.append(name)

    def matrix(self) -> np.ndarray:
        return np.vstack(self.rows) if self.rows else np.zeros((0, self.n))


def build_ll_lp(mg: Microgrid, horizon: Optional[int] = None, initial_exchange: float = 0.0) -> LowerLevelLp:
    """Operation LP of a microgrid: balance, exchange, DG, IL, storage and ramp rows"""
    horizon = horizon or mg.horizon
    index = {(family, t): len(FAMILIES) * t + f
             for t in range(horizon) for f, family in enumerate(FAMILIES)}
    n = len(index)
    variables = [f"{family}_t{t + 1}" for t in range(horizon) for family in FAMILIES]

    def col(family: str, t: int) -> int:
        return index[(family, t)]

    cost = np.zeros(n)
    for t in range(horizon):
        cost[col("pdg", t)] = mg.dg.bid
        cost[col("pil", t)] = mg.il_bid[t]

    es = mg.storage
    eq = _Rows(n)
    ineq = _Rows(n)
    for t in range(horizon):
        tag = f"t{t + 1}"
        eq.add(f"bal_{tag}", {col("pmg", t): 1.0, col("pdg", t): 1.0, col("pil", t): 1.0,
                              col("pdch", t): 1.0, col("pch", t): -1.0}, mg.demand[t] - mg.pv[t])
        soc = {col("soc", t): 1.0, col("pch", t): -es.eta_ch, col("pdch", t): 1.0 / es.eta_dch}
        if t > 0:
            soc[col("soc", t - 1)] = -1.0
        eq.add(f"soc_{tag}", soc, 0.0 if t > 0 else es.e_initial)
        ramp = {col("pmg", t): 1.0, col("dmg", t): -1.0}
        if t > 0:
            ramp[col("pmg", t - 1)] = -1.0
        eq.add(f"ramp_{tag}", ramp, 0.0 if t > 0 else initial_exchange)

        ineq.add(f"xup_{tag}", {col("pmg", t): 1.0}, mg.exchange_max)
        ineq.add(f"xlo_{tag}", {col("pmg", t): -1.0}, mg.exchange_max)
        ineq.add(f"dgup_{tag}", {col("pdg", t): 1.0}, mg.dg.p_max)
        ineq.add(f"dglo_{tag}", {col("pdg", t): -1.0}, -mg.dg.p_min)
        if t > 0:
            ineq.add(f"rup_{tag}", {col("pdg", t): 1.0, col("pdg", t - 1): -1.0}, mg.dg.ramp_up)
            ineq.add(f"rdn_{tag}", {col("pdg", t - 1): 1.0, col("pdg", t): -1.0}, mg.dg.ramp_down)
        else:
            ineq.add(f"rup_{tag}", {col("pdg", t): 1.0}, mg.dg.ramp_up + mg.dg.p_initial)
            ineq.add(f"rdn_{tag}", {col("pdg", t): -1.0}, mg.dg.ramp_down - mg.dg.p_initial)
        ineq.add(f"ilup_{tag}", {col("pil", t): 1.0}, mg.il_cap(t))
        ineq.add(f"illo_{tag}", {col("pil", t): -1.0}, 0.0)
        ineq.add(f"chup_{tag}", {col("pch", t): 1.0}, es.p_rate_max)
        ineq.add(f"chlo_{tag}", {col("pch", t): -1.0}, 0.0)
        ineq.add(f"dchup_{tag}", {col("pdch", t): 1.0}, es.p_rate_max)
        ineq.add(f"dchlo_{tag}", {col("pdch", t): -1.0}, 0.0)
        ineq.add(f"socup_{tag}", {col("soc", t): 1.0}, es.e_max)
        ineq.add(f"soclo_{tag}", {col("soc", t): -1.0}, -es.e_min)

    lp = LowerLevelLp(
        name=mg.mg_id,
        variables=variables,
        cost=cost,
        price_columns=[col("pmg", t) for t in range(horizon)],
        A_eq=eq.matrix(), b_eq=np.array(eq.rhs), eq_names=eq.names,
        A_in=ineq.matrix(), b_in=np.array(ineq.rhs), in_names=ineq.names,
        horizon=horizon,
        families={family: [col(family, t) for t in range(horizon)] for family in FAMILIES}
    )
    logger.debug(f"Lower-level LP {mg.mg_id}: {lp.num_variables} variables, "
                 f"{lp.num_equalities} equalities, {lp.num_inequalities} inequalities")
    return lp
