"""
Disco (upper-level) columns, rows and objective terms

First-stage decisions (WEM purchase, LEM price, ramp allowance) carry no
scenario index; Disco DG output, interruptible load and the network flow are
repeated for every scenario and weighted by its probability in the objective.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..milp.model import MilpBuilder, INF
from ..network.flow import BusInjection, FlowVarSet, emit_flow_block
from ..scenarios.engine import ScenarioSet
from ..shared.models import NetworkModel, Microgrid, MarketData, CaseConfig

logger = logging.getLogger("stage.compiler")


@dataclass
class FirstStage:
    purchase: List[int]  # P^E per t
    price: List[int]  # rho^LEM per t
    ramp_allowance: List[int] = field(default_factory=list)  # Delta^F per t, empty without flexibility


@dataclass
class UpperLevel:
    first_stage: FirstStage
    disco_dg: Dict[Tuple[str, int, int], int] = field(default_factory=dict)  # (unit, t, s)
    disco_il: Dict[Tuple[int, int, int], int] = field(default_factory=dict)  # (bus, t, s)
    flow: FlowVarSet = field(default_factory=FlowVarSet)
    retail_revenue: float = 0.0


def add_first_stage(builder: MilpBuilder, market: MarketData, config: CaseConfig) -> FirstStage:
    """P^E, rho^LEM and (with flexibility) Delta^F columns with their cost terms"""
    horizon = config.horizon
    purchase, price, allowance = [], [], []
    for t in range(horizon):
        tag = f"t{t + 1}"
        purchase.append(builder.add_column(f"pe_{tag}", 0.0, market.wem_purchase_cap,
                                           objective=-market.wem_price[t]))
        price.append(builder.add_column(f"lem_{tag}", 0.0, market.lem_price_cap))
        if config.flexibility_enabled:
            # Without a pre-horizon purchase there is no hour-1 ramp to allow for
            upper = 0.0 if t == 0 and config.initial_purchase is None else INF
            allowance.append(builder.add_column(f"df_{tag}", 0.0, upper,
                                                objective=-market.penalty_price[t]))
    return FirstStage(purchase, price, allowance)


def _bus_load(network: NetworkModel, bus_id: int, t: int, multiplier: float) -> float:
    return network.bus(bus_id).base_load[t] * multiplier


def build_upper_level(builder: MilpBuilder, network: NetworkModel, microgrids: List[Microgrid],
                      scenarios: ScenarioSet, market: MarketData, config: CaseConfig,
                      first_stage: FirstStage, exchange: Dict[str, List[int]],
                      mg_ramps: Optional[Dict[str, List[int]]] = None) -> UpperLevel:
    """Second-stage blocks, bus balances and flexibility rows

    ``exchange`` maps each microgrid to its P^MG columns and ``mg_ramps`` to
    its Delta^MG columns; both come from the lower-level blocks.
    """
    horizon = config.horizon
    ul = UpperLevel(first_stage)
    mg_at = {mg.attached_bus: mg for mg in microgrids}

    for s, scenario in enumerate(scenarios):
        pi = scenario.probability
        for t in range(horizon):
            tag = f"t{t + 1}_s{s + 1}"
            injections: Dict[int, BusInjection] = {}

            for dg in network.dgs:
                col = builder.add_column(f"dg_{dg.unit_id}_{tag}", dg.p_min, dg.p_max,
                                         objective=-pi * dg.bid)
                ul.disco_dg[(dg.unit_id, t, s)] = col
                if t > 0:
                    prev = ul.disco_dg[(dg.unit_id, t - 1, s)]
                    builder.add_row(f"dgrup_{dg.unit_id}_{tag}", {col: 1.0, prev: -1.0}, "<=", dg.ramp_up)
                    builder.add_row(f"dgrdn_{dg.unit_id}_{tag}", {prev: 1.0, col: -1.0}, "<=", dg.ramp_down)
                else:
                    builder.add_row(f"dgrup_{dg.unit_id}_{tag}", {col: 1.0}, "<=", dg.ramp_up + dg.p_initial)
                    builder.add_row(f"dgrdn_{dg.unit_id}_{tag}", {col: -1.0}, "<=", dg.ramp_down - dg.p_initial)
                injections.setdefault(dg.bus_id, BusInjection()).add(col, 1.0)

            for bus in network.buses:
                load = _bus_load(network, bus.bus_id, t, scenario.load_multiplier[t])
                injection = injections.setdefault(bus.bus_id, BusInjection())
                injection.fixed -= load
                ul.retail_revenue += pi * market.retail_price[t] * load
                if bus.base_load[t] > 0.0:
                    cap = min(market.disco_il_cap, market.disco_il_fraction * load)
                    col = builder.add_column(f"il_b{bus.bus_id}_{tag}", 0.0, cap,
                                             objective=-pi * market.disco_il_bid[t])
                    ul.disco_il[(bus.bus_id, t, s)] = col
                    injection.add(col, 1.0)
                for pv in network.pvs_at(bus.bus_id):
                    injection.fixed += pv.profile[t] * scenario.pv_multiplier[t]
                if bus.bus_id in mg_at:
                    injection.add(exchange[mg_at[bus.bus_id].mg_id][t], -1.0)
                if bus.bus_id == network.root_bus:
                    injection.add(first_stage.purchase[t], 1.0)

            emit_flow_block(builder, network, injections, t, s, config.pwl_segments, ul.flow)

    if config.flexibility_enabled:
        _flexibility_rows(builder, microgrids, config, first_stage, mg_ramps or {})

    builder.objective_constant += ul.retail_revenue
    return ul


def _flexibility_rows(builder: MilpBuilder, microgrids: List[Microgrid], config: CaseConfig,
                      first_stage: FirstStage, mg_ramps: Dict[str, List[int]]):
    pe, df = first_stage.purchase, first_stage.ramp_allowance
    for t in range(config.horizon):
        if t == 0 and config.initial_purchase is None:
            continue
        tag = f"t{t + 1}"
        previous = config.initial_purchase if t == 0 else None
        up = {pe[t]: 1.0, df[t]: -1.0}
        down = {pe[t]: -1.0, df[t]: -1.0}
        if previous is None:
            up[pe[t - 1]] = -1.0
            down[pe[t - 1]] = 1.0
        builder.add_row(f"flexup_{tag}", up, "<=", previous or 0.0)
        builder.add_row(f"flexdn_{tag}", down, "<=", -(previous or 0.0))

        if microgrids:
            ramps = [mg_ramps[mg.mg_id][t] for mg in microgrids]
            builder.add_row(f"mgflexup_{tag}", {**{c: 1.0 for c in ramps}, df[t]: -1.0}, "<=", 0.0)
            builder.add_row(f"mgflexdn_{tag}", {**{c: -1.0 for c in ramps}, df[t]: -1.0}, "<=", 0.0)
