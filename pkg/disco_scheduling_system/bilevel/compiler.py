"""
Single-level MILP of the Disco/microgrid game

Each microgrid LP is replaced by its primal rows, stationarity rows and
big-M complementarity rows; the leader's LEM revenue, a product of two
decision variables, is replaced by the strong-duality expression of each
lower level. Column order is first stage, lower-level blocks per microgrid,
then the second-stage blocks per scenario and hour.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..milp.model import MilpBuilder, MilpModel, Solution, INF
from ..scenarios.engine import ScenarioSet
from ..shared.exceptions import IndexSetMismatchError, StructuralError, ModelBuildError
from ..shared.logging_config import PerformanceLogger
from ..shared.models import (NetworkModel, Microgrid, MarketData, CaseConfig, ScheduleSolution)
from .kkt import (KktSystem, ComplementarityEncoding, DualityObjectiveExpr, derive_kkt,
                  encode_complementarity, strong_duality_expr, variable_boxes)
from .lower_level import LowerLevelLp, build_ll_lp
from .upper_level import FirstStage, UpperLevel, add_first_stage, build_upper_level

logger = logging.getLogger("stage.compiler")
perf_logger = PerformanceLogger()

BIG_M_ACTIVE_TOL = 1e-6


@dataclass
class LlBlock:
    """Column indices of one lower level inside the assembled model"""
    lp: LowerLevelLp
    kkt: KktSystem
    encoding: ComplementarityEncoding
    duality: DualityObjectiveExpr
    primal: List[int]
    lam: List[int]
    mu: List[int]
    binaries: List[int]
    prefix: str

    def values(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(primal, lambda, mu) read out of a full solution vector"""
        return x[self.primal], x[self.lam], x[self.mu]

    def revenue(self, x: np.ndarray) -> float:
        primal, lam, mu = self.values(x)
        return self.duality.evaluate(primal, lam, mu)


@dataclass
class CompiledModel:
    model: MilpModel
    first_stage: FirstStage
    upper: UpperLevel
    blocks: Dict[str, LlBlock]
    network: NetworkModel
    microgrids: List[Microgrid]
    scenarios: ScenarioSet
    market: MarketData
    config: CaseConfig
    warnings: List[str] = field(default_factory=list)


def emit_lower_level_block(builder: MilpBuilder, lp: LowerLevelLp, encoding: ComplementarityEncoding,
                           prefix: Optional[str] = None, price_columns: Optional[Sequence[int]] = None,
                           prices: Optional[Sequence[float]] = None) -> LlBlock:
    """Primal, dual and binary columns of one lower level with all of its optimality rows

    The exchange price either comes from model columns (``price_columns``,
    one per hour) or is fixed (``prices``); exactly one of the two is given.
    """
    if (price_columns is None) == (prices is None):
        raise ModelBuildError("give either price columns or fixed prices for a lower-level block")
    kkt = encoding.kkt
    if kkt.lp is not lp:
        raise ModelBuildError("complementarity encoding belongs to a different lower-level LP")
    slots = price_columns if price_columns is not None else prices
    if len(slots) != len(lp.price_columns):
        raise IndexSetMismatchError(f"{lp.name} needs {len(lp.price_columns)} hourly prices, got {len(slots)}")
    prefix = prefix or lp.name

    boxes = variable_boxes(lp)
    primal = []
    for j, name in enumerate(lp.variables):
        lower, upper = boxes[j]
        if lower > upper:
            raise StructuralError(f"variable '{name}' of {lp.name} has an empty range [{lower}, {upper}]")
        primal.append(builder.add_column(f"{prefix}_{name}", lower, upper))
    lam = [builder.add_column(f"{prefix}_lam_{name}", -INF, INF) for name in lp.eq_names]
    mu = [builder.add_column(f"{prefix}_mu_{lp.in_names[k]}", 0.0, encoding.big_m_dual[n])
          for n, k in enumerate(kkt.pairs)]
    binaries = [builder.add_binary(f"{prefix}_u_{lp.in_names[k]}") for k in kkt.pairs]

    for i, name in enumerate(lp.eq_names):
        terms = {primal[j]: float(lp.A_eq[i, j]) for j in np.flatnonzero(lp.A_eq[i])}
        builder.add_row(f"{prefix}_{name}", terms, "=", float(lp.b_eq[i]))
    for k, name in enumerate(lp.in_names):
        terms = {primal[j]: float(lp.A_in[k, j]) for j in np.flatnonzero(lp.A_in[k])}
        builder.add_row(f"{prefix}_{name}", terms, "<=", float(lp.b_in[k]))

    for row in kkt.stationarity:
        terms = {lam[i]: v for i, v in row.eq_terms.items()}
        terms.update({mu[k]: v for k, v in row.in_terms.items()})
        rhs = -row.constant
        if row.price_slot is not None:
            if price_columns is not None:
                terms[price_columns[row.price_slot]] = 1.0
            else:
                rhs -= float(prices[row.price_slot])
        builder.add_row(f"{prefix}_stat_{lp.variables[row.variable]}", terms, "=", rhs)

    for n, k in enumerate(kkt.pairs):
        name = lp.in_names[k]
        m_primal, m_dual = encoding.big_m_primal[n], encoding.big_m_dual[n]
        # b - A x <= M_p (1 - u)
        terms = {primal[j]: -float(lp.A_in[k, j]) for j in np.flatnonzero(lp.A_in[k])}
        terms[binaries[n]] = m_primal
        builder.add_row(f"{prefix}_cp_{name}", terms, "<=", m_primal - float(lp.b_in[k]))
        builder.add_row(f"{prefix}_cd_{name}", {mu[n]: 1.0, binaries[n]: -m_dual}, "<=", 0.0)

    duality = strong_duality_expr(lp, kkt)
    return LlBlock(lp, kkt, encoding, duality, primal, lam, mu, binaries, prefix)


def compile_lower_level_milp(lp: LowerLevelLp, prices: Sequence[float],
                             big_m_primal: Optional[float] = None, big_m_dual: Optional[float] = None,
                             price_cap: float = 0.0) -> Tuple[MilpModel, LlBlock]:
    """Stand-alone KKT reformulation of one lower level at fixed prices, minimizing its cost"""
    kkt = derive_kkt(lp)
    price_cap = max(price_cap, float(np.abs(prices).max(initial=0.0)))
    encoding = encode_complementarity(kkt, big_m_primal, big_m_dual, price_cap)
    builder = MilpBuilder(f"{lp.name}_kkt")
    block = emit_lower_level_block(builder, lp, encoding, prices=prices)
    for j, c in enumerate(lp.cost_vector(prices)):
        if c:
            builder.add_objective(block.primal[j], c)
    return builder.build("min"), block


def _check_index_sets(network: NetworkModel, microgrids: List[Microgrid], scenarios: ScenarioSet,
                      market: MarketData, config: CaseConfig):
    horizon = config.horizon
    sizes = {'market': market.horizon, 'network': network.horizon, 'scenarios': scenarios.horizon}
    sizes.update({f"microgrid {mg.mg_id}": mg.horizon for mg in microgrids})
    for entity, size in sizes.items():
        if size != horizon:
            raise IndexSetMismatchError(f"{entity} covers {size} hours, case horizon is {horizon}")
    bus_ids = set(network.bus_ids)
    seen = {}
    for mg in microgrids:
        if mg.attached_bus not in bus_ids:
            raise IndexSetMismatchError(f"microgrid {mg.mg_id} is attached to unknown bus {mg.attached_bus}")
        if mg.attached_bus in seen:
            raise IndexSetMismatchError(f"microgrids {seen[mg.attached_bus]} and {mg.mg_id} "
                                        f"share bus {mg.attached_bus}")
        seen[mg.attached_bus] = mg.mg_id


def assemble_milp(network: NetworkModel, microgrids: List[Microgrid], scenarios: ScenarioSet,
                  market: MarketData, config: CaseConfig) -> CompiledModel:
    """Compile the bilevel problem into one maximization MILP"""
    _check_index_sets(network, microgrids, scenarios, market, config)
    builder = MilpBuilder(config.name)
    first_stage = add_first_stage(builder, market, config)

    blocks: Dict[str, LlBlock] = {}
    for mg in microgrids:
        lp = build_ll_lp(mg, config.horizon, config.initial_exchange)
        kkt = derive_kkt(lp)
        encoding = encode_complementarity(kkt, config.big_m_primal, config.big_m_dual, market.lem_price_cap)
        block = emit_lower_level_block(builder, lp, encoding, prefix=mg.mg_id,
                                       price_columns=first_stage.price)
        for term_columns, terms in ((block.lam, block.duality.eq_terms),
                                    (block.mu, block.duality.in_terms),
                                    (block.primal, block.duality.primal_terms)):
            for index, coefficient in terms.items():
                builder.add_objective(term_columns[index], coefficient)
        blocks[mg.mg_id] = block

    exchange = {mg_id: [block.primal[j] for j in block.lp.price_columns] for mg_id, block in blocks.items()}
    ramps = {mg_id: [block.primal[j] for j in block.lp.families["dmg"]] for mg_id, block in blocks.items()}
    upper = build_upper_level(builder, network, microgrids, scenarios, market, config,
                              first_stage, exchange, ramps)

    model = builder.build("max")
    stats = model.statistics()
    perf_logger.log_model_statistics(model.name, stats['rows'], stats['columns'], stats['binaries'],
                                     stats['nonzeros'], scenarios=len(scenarios),
                                     microgrids=len(microgrids))
    logger.info(f"Assembled {model.name}: {stats['rows']} rows, {stats['columns']} columns, "
                f"{stats['binaries']} binaries")
    return CompiledModel(model, first_stage, upper, blocks, network, list(microgrids), scenarios,
                         market, config)


def extract_solution(compiled: CompiledModel, solution: Solution) -> ScheduleSolution:
    """Schedule view of a solved MILP"""
    if not solution.has_values:
        raise ModelBuildError(f"cannot extract a schedule from a '{solution.status}' solve")
    x = np.asarray(solution.values, dtype=float)
    horizon = compiled.config.horizon
    first = compiled.first_stage
    upper = compiled.upper

    def pick(columns: List[int]) -> List[float]:
        return [float(x[c]) for c in columns]

    disco_il, disco_dg, losses, line_flows = [], [], [], []
    for s in range(len(compiled.scenarios)):
        # IL columns exist only in hours with load at the bus
        disco_il.append({bus.bus_id: [float(x[upper.disco_il[(bus.bus_id, t, s)]])
                                      if (bus.bus_id, t, s) in upper.disco_il else 0.0
                                      for t in range(horizon)]
                         for bus in compiled.network.buses
                         if any((bus.bus_id, t, s) in upper.disco_il for t in range(horizon))})
        disco_dg.append({dg.unit_id: [float(x[upper.disco_dg[(dg.unit_id, t, s)]]) for t in range(horizon)]
                         for dg in compiled.network.dgs})
        losses.append([float(sum(x[upper.flow.loss[(k, t, s)]] for k in range(len(compiled.network.lines))))
                       for t in range(horizon)])
        line_flows.append({line.name: {"p_from": [float(x[upper.flow.p_from[(k, t, s)]]) for t in range(horizon)],
                                       "p_to": [float(x[upper.flow.p_to[(k, t, s)]]) for t in range(horizon)]}
                           for k, line in enumerate(compiled.network.lines)})

    mg_schedule = {mg_id: {family: pick([block.primal[j] for j in columns])
                           for family, columns in block.lp.families.items()}
                   for mg_id, block in compiled.blocks.items()}

    return ScheduleSolution(
        status=solution.status,
        objective=float(solution.objective),
        wem_purchase=pick(first.purchase),
        lem_price=pick(first.price),
        delta_f=pick(first.ramp_allowance) if first.ramp_allowance else [0.0] * horizon,
        probabilities=compiled.scenarios.probabilities,
        disco_il=disco_il,
        disco_dg=disco_dg,
        losses=losses,
        line_flows=line_flows,
        mg_schedule=mg_schedule,
        duality_revenue={mg_id: block.revenue(x) for mg_id, block in compiled.blocks.items()},
        warnings=list(solution.warnings),
        stats=dict(solution.stats)
    )


def check_big_m(compiled: CompiledModel, solution: Solution, tolerance: float = BIG_M_ACTIVE_TOL) -> List[str]:
    """Pairs whose slack or dual sits at its big-M, where the encoding may have cut the optimum"""
    x = np.asarray(solution.values, dtype=float)
    warnings = []
    for mg_id, block in compiled.blocks.items():
        lp, encoding = block.lp, block.encoding
        primal, _, mu = block.values(x)
        slack = lp.b_in - lp.A_in @ primal
        for n, k in enumerate(block.kkt.pairs):
            pair = f"{block.prefix}_{lp.in_names[k]}"
            for kind, value, big_m in (("slack", slack[k], encoding.big_m_primal[n]),
                                       ("dual", mu[n], encoding.big_m_dual[n])):
                if value >= big_m * (1.0 - tolerance):
                    perf_logger.log_big_m_warning(pair, kind, float(value), big_m)
                    warnings.append(f"{kind} of {pair} reached its big-M {big_m:g}")
    return warnings
