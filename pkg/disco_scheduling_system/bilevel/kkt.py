"""
Optimality system of a lower-level LP

With duals lambda (free) on equalities and mu >= 0 on inequalities the
conditions read

    stationarity      c + A_eq' lambda + A_in' mu = 0
    complementarity   mu_k * (b_in - A_in x)_k = 0

and strong duality gives c.x = -lambda.b_eq - mu.b_in at optimality, which
turns the leader's price-times-quantity revenue into a linear expression.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..shared.exceptions import StructuralError, ModelBuildError
from .lower_level import LowerLevelLp

logger = logging.getLogger("stage.compiler")

MIN_BIG_M = 1.0
PRIMAL_M_FACTOR = 2.0
DUAL_M_FACTOR = 10.0


@dataclass
class StationarityRow:
    """One row per primal variable: constant (+ price) + sum of dual terms = 0"""
    variable: int
    constant: float
    price_slot: Optional[int]  # hour whose price enters the row, if any
    eq_terms: Dict[int, float] = field(default_factory=dict)
    in_terms: Dict[int, float] = field(default_factory=dict)


@dataclass
class KktSystem:
    lp: LowerLevelLp
    stationarity: List[StationarityRow]
    pairs: List[int]  # inequality row of each complementarity pair

    @property
    def num_duals(self) -> int:
        return self.lp.num_equalities + self.lp.num_inequalities

    def residual(self, x: np.ndarray, lam: np.ndarray, mu: np.ndarray,
                 prices: Sequence[float]) -> Dict[str, float]:
        """Worst violation of each block of conditions at a given point"""
        lp = self.lp
        gradient = lp.cost_vector(prices) + lp.A_eq.T @ lam + lp.A_in.T @ mu
        slack = lp.b_in - lp.A_in @ x
        eq, ineq = lp.residuals(x)
        return {
            'stationarity': float(np.abs(gradient).max(initial=0.0)),
            'primal_equality': eq,
            'primal_inequality': ineq,
            'dual_sign': float(np.maximum(-mu, 0.0).max(initial=0.0)),
            'complementarity': float(np.abs(slack * mu).max(initial=0.0))
        }


@dataclass
class ComplementarityEncoding:
    """Big-M constants per pair: slack <= M_p (1 - u), mu <= M_d u"""
    kkt: KktSystem
    big_m_primal: List[float]
    big_m_dual: List[float]

    def __post_init__(self):
        if len(self.big_m_primal) != len(self.kkt.pairs) or len(self.big_m_dual) != len(self.kkt.pairs):
            raise ModelBuildError("one big-M pair per complementarity pair is required")
        if min(self.big_m_primal, default=1.0) <= 0.0 or min(self.big_m_dual, default=1.0) <= 0.0:
            raise ModelBuildError("big-M constants must be positive")


@dataclass
class DualityObjectiveExpr:
    """Linear stand-in for sum_t price_t * P^MG_t at lower-level optimality"""
    eq_terms: Dict[int, float]  # lambda_i -> -b_eq_i
    in_terms: Dict[int, float]  # mu_k -> -b_in_k
    primal_terms: Dict[int, float]  # x_j -> -c_j

    def evaluate(self, x: np.ndarray, lam: np.ndarray, mu: np.ndarray) -> float:
        return (sum(v * lam[i] for i, v in self.eq_terms.items())
                + sum(v * mu[k] for k, v in self.in_terms.items())
                + sum(v * x[j] for j, v in self.primal_terms.items()))


def derive_kkt(lp: LowerLevelLp) -> KktSystem:
    """Stationarity rows and complementarity pairs of a canonical LP"""
    price_slot = {j: t for t, j in enumerate(lp.price_columns)}
    rows = []
    for j in range(lp.num_variables):
        eq_terms = {i: float(lp.A_eq[i, j]) for i in np.flatnonzero(lp.A_eq[:, j])} if lp.num_equalities else {}
        in_terms = {k: float(lp.A_in[k, j]) for k in np.flatnonzero(lp.A_in[:, j])} if lp.num_inequalities else {}
        if not eq_terms and not in_terms:
            raise StructuralError(f"variable '{lp.variables[j]}' of {lp.name} appears in no row")
        rows.append(StationarityRow(j, float(lp.cost[j]), price_slot.get(j),
                                    {int(i): v for i, v in eq_terms.items()},
                                    {int(k): v for k, v in in_terms.items()}))
    return KktSystem(lp, rows, list(range(lp.num_inequalities)))


def variable_boxes(lp: LowerLevelLp) -> np.ndarray:
    """Bounds implied by the single-variable inequality rows, shape (n, 2)"""
    boxes = np.tile([-np.inf, np.inf], (lp.num_variables, 1)).astype(float)
    for k in range(lp.num_inequalities):
        nonzero = np.flatnonzero(lp.A_in[k])
        if nonzero.size != 1:
            continue
        j = int(nonzero[0])
        a, b = lp.A_in[k, j], lp.b_in[k]
        if a > 0:
            boxes[j, 1] = min(boxes[j, 1], b / a)
        else:
            boxes[j, 0] = max(boxes[j, 0], b / a)
    return boxes


def slack_bounds(lp: LowerLevelLp) -> np.ndarray:
    """Largest value each inequality slack can take over the implied variable boxes"""
    boxes = variable_boxes(lp)
    bounds = np.zeros(lp.num_inequalities)
    for k in range(lp.num_inequalities):
        row = lp.A_in[k]
        lowest = 0.0
        for j in np.flatnonzero(row):
            a = row[j]
            lowest += a * (boxes[j, 0] if a > 0 else boxes[j, 1])
        bounds[k] = lp.b_in[k] - lowest
    return bounds


def encode_complementarity(kkt: KktSystem, big_m_primal: Optional[float] = None,
                           big_m_dual: Optional[float] = None,
                           price_cap: float = 0.0) -> ComplementarityEncoding:
    """Big-M constants per pair, defaulting to interval-arithmetic and cost-based values"""
    lp = kkt.lp
    pairs = kkt.pairs
    if big_m_primal is not None:
        m_primal = [float(big_m_primal)] * len(pairs)
    else:
        bounds = slack_bounds(lp)
        m_primal = []
        for k in pairs:
            if not np.isfinite(bounds[k]):
                raise StructuralError(f"slack of row '{lp.in_names[k]}' in {lp.name} is unbounded; "
                                      "set big_m_primal explicitly")
            m_primal.append(max(PRIMAL_M_FACTOR * bounds[k], MIN_BIG_M))

    if big_m_dual is not None:
        m_dual = [float(big_m_dual)] * len(pairs)
    else:
        largest = max(float(np.abs(lp.cost).max(initial=0.0)), abs(price_cap))
        m_dual = [max(DUAL_M_FACTOR * largest, MIN_BIG_M)] * len(pairs)
    return ComplementarityEncoding(kkt, m_primal, m_dual)


def strong_duality_expr(lp: LowerLevelLp, kkt: Optional[KktSystem] = None) -> DualityObjectiveExpr:
    """sum_t price_t P^MG_t = -lambda.b_eq - mu.b_in - c.x (fixed costs only)"""
    if kkt is not None and kkt.lp is not lp:
        raise ModelBuildError("KKT system belongs to a different lower-level LP")
    return DualityObjectiveExpr(
        eq_terms={i: -float(b) for i, b in enumerate(lp.b_eq) if b != 0.0},
        in_terms={k: -float(b) for k, b in enumerate(lp.b_in) if b != 0.0},
        primal_terms={j: -float(c) for j, c in enumerate(lp.cost) if c != 0.0}
    )


def kkt_audit_lines(kkt: KktSystem, encoding: Optional[ComplementarityEncoding] = None) -> List[str]:
    """Human-readable dump: one line per stationarity row and per pair"""
    lp = kkt.lp
    lines = [f"# {lp.name}: {lp.num_variables} variables, {lp.num_equalities} equalities, "
             f"{lp.num_inequalities} inequalities"]
    for row in kkt.stationarity:
        terms = [f"{row.constant:+g}"]
        if row.price_slot is not None:
            terms.append(f"+ price[t{row.price_slot + 1}]")
        terms += [f"{v:+g}*lam[{lp.eq_names[i]}]" for i, v in sorted(row.eq_terms.items())]
        terms += [f"{v:+g}*mu[{lp.in_names[k]}]" for k, v in sorted(row.in_terms.items())]
        lines.append(f"stat {lp.variables[row.variable]}: {' '.join(terms)} = 0")
    for n, k in enumerate(kkt.pairs):
        line = f"pair {lp.in_names[k]}: slack = {lp.b_in[k]:g} - row, mu[{lp.in_names[k]}] >= 0"
        if encoding is not None:
            line += f", M_p = {encoding.big_m_primal[n]:g}, M_d = {encoding.big_m_dual[n]:g}"
        lines.append(line)
    return lines
