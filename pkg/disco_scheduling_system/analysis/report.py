"""
Case reports, with/without-flexibility comparison and figure data

Every figure in a report is recomputed from primal values, independently of
the MILP objective, and checked against the solver before it is written.
"""

import json
import logging
import os
from dataclasses import dataclass, field, asdict
from typing import Dict, Any, List, Optional

import numpy as np
import pandas as pd

from ..bilevel.compiler import CompiledModel
from ..shared.exceptions import InvariantViolation, IndexSetMismatchError
from ..shared.models import ScheduleSolution

logger = logging.getLogger("stage.report")

REPORT_TOL = 1e-4
BALANCE_TOL = 1e-6

PLOT_FILES = ("purchased_power.csv", "ramp.csv", "mg_ramp_bounds.csv",
              "demand_supply_balance.csv", "lem_price.csv")


@dataclass
class RampProfile:
    """Hour-to-hour change of the WEM purchase

    The first entry is measured against the pre-horizon purchase when one is
    configured and is 0 otherwise.
    """
    purchase: List[float]
    ramps: List[float]
    delta_f: Optional[List[float]] = None

    @classmethod
    def from_purchase(cls, purchase: List[float], initial: Optional[float] = None,
                      delta_f: Optional[List[float]] = None) -> 'RampProfile':
        first = purchase[0] - initial if initial is not None and purchase else 0.0
        ramps = [first] + [b - a for a, b in zip(purchase[:-1], purchase[1:])]
        return cls(list(purchase), ramps[:len(purchase)], list(delta_f) if delta_f is not None else None)

    @property
    def max_up(self) -> float:
        return max(self.ramps, default=0.0)

    @property
    def max_down(self) -> float:
        return min(self.ramps, default=0.0)

    def cap_violation(self) -> float:
        """Largest |ramp| in excess of the allowance; 0 without flexibility"""
        if self.delta_f is None:
            return 0.0
        return max((abs(r) - d for r, d in zip(self.ramps, self.delta_f)), default=0.0)


@dataclass
class CaseReport:
    name: str
    flexibility_enabled: bool
    status: str
    objective: float  # as reported by the solver
    profit: float  # recomputed from primal values
    retail_revenue: float
    lem_revenue: float
    wem_cost: float
    penalty_cost: float
    disco_dg_cost: float
    disco_il_cost: float
    total_purchase: float
    disco_il_total: float  # expected MW summed over the horizon
    disco_dg_total: float
    ramp: RampProfile
    lem_price: List[float]
    mg_costs: Dict[str, float]
    mg_exchange: Dict[str, List[float]]
    mg_ramps: Dict[str, List[float]]
    report_scenario: int  # 0-based
    balance: List[Dict[str, float]]  # per hour, report scenario
    bus_balance: List[Dict[str, float]]  # per (bus, hour), report scenario
    mg_balance: Dict[str, List[Dict[str, float]]]
    scenario_views: List[Dict[str, float]]
    reference: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.lem_price)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CaseReport':
        payload = dict(data)
        payload['ramp'] = RampProfile(**data['ramp'])
        return cls(**payload)

    def save(self, path: str) -> str:
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, default=float)
        return path

    @classmethod
    def load(cls, path: str) -> 'CaseReport':
        with open(path, 'r') as f:
            return cls.from_dict(json.load(f))

    def summary(self) -> Dict[str, float]:
        return {
            'profit': self.profit,
            'total_purchase': self.total_purchase,
            'max_ramp_up': self.ramp.max_up,
            'max_ramp_down': self.ramp.max_down,
            'disco_il_total': self.disco_il_total,
            'disco_dg_total': self.disco_dg_total,
            'lem_revenue': self.lem_revenue,
            'mg_cost_total': sum(self.mg_costs.values())
        }


def _close(a: float, b: float, tolerance: float) -> bool:
    return abs(a - b) <= tolerance * max(1.0, abs(a), abs(b))


def build_report(compiled: CompiledModel, schedule: ScheduleSolution, reference: Optional[Dict[str, Any]] = None,
                 report_scenario: Optional[int] = None, tolerance: float = REPORT_TOL) -> CaseReport:
    """Recompute the Disco profit and microgrid costs and lay out the per-hour tables"""
    network, market, config = compiled.network, compiled.market, compiled.config
    scenarios = compiled.scenarios
    horizon = config.horizon
    price = np.array(schedule.lem_price)
    purchase = np.array(schedule.wem_purchase)

    exchange = {mg: np.array(s['pmg']) for mg, s in schedule.mg_schedule.items()}
    total_exchange = sum(exchange.values(), np.zeros(horizon))

    retail = 0.0
    dg_cost = il_cost = dg_total = il_total = 0.0
    views = []
    for s, scenario in enumerate(scenarios):
        load = np.array([sum(bus.base_load[t] for bus in network.buses) * scenario.load_multiplier[t]
                         for t in range(horizon)])
        dg = {unit: np.array(v) for unit, v in schedule.disco_dg[s].items()}
        il = sum((np.array(v) for v in schedule.disco_il[s].values()), np.zeros(horizon))
        scenario_dg_cost = sum(unit.bid * float(dg[unit.unit_id].sum()) for unit in network.dgs)
        scenario_il_cost = float(np.dot(il, market.disco_il_bid))
        retail += scenario.probability * float(np.dot(load, market.retail_price))
        dg_cost += scenario.probability * scenario_dg_cost
        il_cost += scenario.probability * scenario_il_cost
        scenario_dg = float(sum(v.sum() for v in dg.values()))
        dg_total += scenario.probability * scenario_dg
        il_total += scenario.probability * float(il.sum())
        views.append({'scenario': s + 1, 'probability': scenario.probability,
                      'disco_dg_total': scenario_dg, 'disco_il_total': float(il.sum()),
                      'losses_total': float(sum(schedule.losses[s]))})

    lem_revenue = float(np.dot(price, total_exchange))
    wem_cost = float(np.dot(purchase, market.wem_price))
    penalty_cost = float(np.dot(schedule.delta_f, market.penalty_price)) if config.flexibility_enabled else 0.0
    profit = retail + lem_revenue - wem_cost - penalty_cost - dg_cost - il_cost

    warnings = list(schedule.warnings)
    if not _close(profit, schedule.objective, tolerance):
        raise InvariantViolation(f"recomputed profit {profit:.6f} differs from solver objective "
                                 f"{schedule.objective:.6f}")

    mg_costs = {}
    for mg_id, block in compiled.blocks.items():
        values = schedule.mg_schedule[mg_id]
        lp = block.lp
        cost = sum(lp.cost[lp.families['pdg'][t]] * values['pdg'][t]
                   + lp.cost[lp.families['pil'][t]] * values['pil'][t]
                   + price[t] * values['pmg'][t] for t in range(horizon))
        revenue = float(np.dot(price, values['pmg']))
        if not _close(revenue, schedule.duality_revenue[mg_id], tolerance):
            raise InvariantViolation(f"strong-duality revenue of {mg_id} is {schedule.duality_revenue[mg_id]:.6f}, "
                                     f"price times exchange is {revenue:.6f}")
        mg_costs[mg_id] = float(cost)

    ramp = RampProfile.from_purchase(list(purchase), config.initial_purchase,
                                     schedule.delta_f if config.flexibility_enabled else None)
    if config.flexibility_enabled:
        start = 0 if config.initial_purchase is not None else 1
        capped = RampProfile(ramp.purchase[start:], ramp.ramps[start:], ramp.delta_f[start:])
        if capped.cap_violation() > tolerance:
            raise InvariantViolation(f"purchase ramp exceeds its allowance by {capped.cap_violation():.6g}")
        for t in range(start, horizon):
            deviation = sum(values['dmg'][t] for values in schedule.mg_schedule.values())
            if abs(deviation) - schedule.delta_f[t] > tolerance:
                raise InvariantViolation(f"microgrid ramps sum to {deviation:.6g} MW in hour {t + 1}, "
                                         f"above the allowance {schedule.delta_f[t]:.6g}")

    if report_scenario is None:
        report_scenario = config.report_scenario - 1 if config.report_scenario else scenarios.modal_index()
    if not 0 <= report_scenario < len(scenarios):
        raise IndexSetMismatchError(f"report scenario {report_scenario + 1} out of range 1..{len(scenarios)}")

    bus_balance = [_bus_balance(compiled, schedule, s) for s in range(len(scenarios))]
    balance = _network_balance(compiled, schedule, report_scenario)
    mg_balance = {mg.mg_id: _mg_balance(mg, schedule.mg_schedule[mg.mg_id]) for mg in compiled.microgrids}

    report = CaseReport(
        name=config.name,
        flexibility_enabled=config.flexibility_enabled,
        status=schedule.status,
        objective=schedule.objective,
        profit=profit,
        retail_revenue=retail,
        lem_revenue=lem_revenue,
        wem_cost=wem_cost,
        penalty_cost=penalty_cost,
        disco_dg_cost=dg_cost,
        disco_il_cost=il_cost,
        total_purchase=float(purchase.sum()),
        disco_il_total=il_total,
        disco_dg_total=dg_total,
        ramp=ramp,
        lem_price=[float(p) for p in price],
        mg_costs=mg_costs,
        mg_exchange={mg: [float(v) for v in values] for mg, values in exchange.items()},
        mg_ramps={mg: list(s['dmg']) for mg, s in schedule.mg_schedule.items()},
        report_scenario=report_scenario,
        balance=balance,
        bus_balance=bus_balance[report_scenario],
        mg_balance=mg_balance,
        scenario_views=views,
        reference=dict(reference or {}),
        warnings=warnings,
        stats=dict(schedule.stats)
    )
    logger.info(f"Report {config.name}: profit {profit:.2f}, purchase {report.total_purchase:.2f} MWh, "
                f"ramps {ramp.max_up:.2f}/{ramp.max_down:.2f} MW/h")
    return report


def _bus_balance(compiled: CompiledModel, schedule: ScheduleSolution, s: int,
                 tolerance: float = BALANCE_TOL) -> List[Dict[str, float]]:
    """Per (bus, hour) injections against line end flows in scenario ``s``"""
    network, horizon = compiled.network, compiled.config.horizon
    scenario = compiled.scenarios[s]
    flows = schedule.line_flows[s]
    mg_at = {mg.attached_bus: mg.mg_id for mg in compiled.microgrids}
    rows = []
    for bus in network.buses:
        b = bus.bus_id
        dgs = [dg.unit_id for dg in network.dgs if dg.bus_id == b]
        sent = [line.name for line in network.lines if line.from_bus == b]
        received = [line.name for line in network.lines if line.to_bus == b]
        for t in range(horizon):
            row = {
                'bus': b,
                'hour': t + 1,
                'wem_purchase': schedule.wem_purchase[t] if b == network.root_bus else 0.0,
                'disco_dg': sum(schedule.disco_dg[s][unit][t] for unit in dgs),
                'disco_il': schedule.disco_il[s][b][t] if b in schedule.disco_il[s] else 0.0,
                'pv': sum(pv.profile[t] for pv in network.pvs_at(b)) * scenario.pv_multiplier[t],
                'load': bus.base_load[t] * scenario.load_multiplier[t],
                'mg_exchange': schedule.mg_schedule[mg_at[b]]['pmg'][t] if b in mg_at else 0.0,
                'line_outflow': (sum(flows[name]['p_from'][t] for name in sent)
                                 + sum(flows[name]['p_to'][t] for name in received))
            }
            row['residual'] = (row['wem_purchase'] + row['disco_dg'] + row['disco_il'] + row['pv']
                               - row['load'] - row['mg_exchange'] - row['line_outflow'])
            if abs(row['residual']) > tolerance:
                raise InvariantViolation(f"balance at bus {b} off by {row['residual']:.3g} MW "
                                         f"in hour {t + 1}, scenario {s + 1}")
            rows.append(row)
    return rows


def _network_balance(compiled: CompiledModel, schedule: ScheduleSolution, s: int) -> List[Dict[str, float]]:
    """Feeder totals per hour; the per-bus rows carry the balance check"""
    network, horizon = compiled.network, compiled.config.horizon
    scenario = compiled.scenarios[s]
    rows = []
    for t in range(horizon):
        row = {
            'hour': t + 1,
            'wem_purchase': schedule.wem_purchase[t],
            'disco_dg': sum(v[t] for v in schedule.disco_dg[s].values()),
            'disco_il': sum(v[t] for v in schedule.disco_il[s].values()),
            'pv': sum(pv.profile[t] for pv in network.pvs) * scenario.pv_multiplier[t],
            'load': sum(bus.base_load[t] for bus in network.buses) * scenario.load_multiplier[t],
            'mg_exchange': sum(values['pmg'][t] for values in schedule.mg_schedule.values()),
            'losses': schedule.losses[s][t]
        }
        row['residual'] = (row['wem_purchase'] + row['disco_dg'] + row['disco_il'] + row['pv']
                           - row['load'] - row['mg_exchange'] - row['losses'])
        rows.append(row)
    return rows


def _mg_balance(mg, values: Dict[str, List[float]]) -> List[Dict[str, float]]:
    rows = []
    for t in range(mg.horizon):
        row = {
            'hour': t + 1,
            'exchange': values['pmg'][t],
            'dg': values['pdg'][t],
            'il': values['pil'][t],
            'discharge': values['pdch'][t],
            'charge': values['pch'][t],
            'pv': mg.pv[t],
            'demand': mg.demand[t]
        }
        row['residual'] = (row['exchange'] + row['dg'] + row['il'] + row['discharge'] + row['pv']
                           - row['charge'] - row['demand'])
        if abs(row['residual']) > BALANCE_TOL:
            raise InvariantViolation(f"{mg.mg_id} balance off by {row['residual']:.3g} MW in hour {t + 1}")
        rows.append(row)
    return rows


@dataclass
class ComparisonTable:
    rows: List[Dict[str, float]]  # metric, noflex, flex, delta
    lost_revenue: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame.from_records(self.rows, columns=['metric', 'noflex', 'flex', 'delta'])

    def delta(self, metric: str) -> float:
        for row in self.rows:
            if row['metric'] == metric:
                return row['delta']
        raise KeyError(metric)


def compare_cases(noflex: CaseReport, flex: CaseReport) -> ComparisonTable:
    """Per-metric deltas (flex minus noflex) and the Disco's lost revenue"""
    if noflex.horizon != flex.horizon:
        raise IndexSetMismatchError(f"cannot compare a {noflex.horizon}-hour case with a {flex.horizon}-hour case")
    if set(noflex.mg_costs) != set(flex.mg_costs):
        raise IndexSetMismatchError("reports cover different microgrids")

    base, other = noflex.summary(), flex.summary()
    for mg_id in noflex.mg_costs:
        base[f"mg_cost_{mg_id}"] = noflex.mg_costs[mg_id]
        other[f"mg_cost_{mg_id}"] = flex.mg_costs[mg_id]
    rows = [{'metric': key, 'noflex': base[key], 'flex': other[key], 'delta': other[key] - base[key]}
            for key in base]
    return ComparisonTable(rows, noflex.profit - flex.profit)


def emit_plot_data(report: CaseReport, outdir: str) -> List[str]:
    """Five figure-data CSVs with one row per hour"""
    os.makedirs(outdir, exist_ok=True)
    hours = list(range(1, report.horizon + 1))
    frames = {}

    frames['purchased_power.csv'] = pd.DataFrame({'hour': hours, 'wem_purchase': report.ramp.purchase})

    ramp = pd.DataFrame({'hour': hours, 'ramp': report.ramp.ramps})
    ramp['delta_f'] = report.ramp.delta_f if report.ramp.delta_f is not None else np.nan
    frames['ramp.csv'] = ramp

    bounds = pd.DataFrame({'hour': hours})
    delta_f = np.array(report.ramp.delta_f) if report.ramp.delta_f is not None else np.full(report.horizon, np.nan)
    bounds['upper'] = delta_f
    bounds['lower'] = -delta_f
    for mg_id, values in report.mg_ramps.items():
        bounds[f"{mg_id}_ramp"] = values
    bounds['mg_ramp_total'] = np.sum([v for v in report.mg_ramps.values()], axis=0) if report.mg_ramps else 0.0
    frames['mg_ramp_bounds.csv'] = bounds

    balance = pd.DataFrame.from_records(report.balance)
    for mg_id, rows in report.mg_balance.items():
        mg_frame = pd.DataFrame.from_records(rows).drop(columns=['hour'])
        balance = pd.concat([balance, mg_frame.add_prefix(f"{mg_id}_")], axis=1)
    frames['demand_supply_balance.csv'] = balance

    frames['lem_price.csv'] = pd.DataFrame({'hour': hours, 'lem_price': report.lem_price})

    paths = []
    for name in PLOT_FILES:
        path = os.path.join(outdir, name)
        frames[name].to_csv(path, index=False, float_format='%.10g')
        paths.append(path)
    logger.info(f"Wrote {len(paths)} figure-data files to {outdir}")
    return paths


def emit_comparison(table: ComparisonTable, outdir: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, 'comparison.csv')
    frame = table.to_frame()
    frame = pd.concat([frame, pd.DataFrame([{'metric': 'lost_revenue', 'noflex': np.nan, 'flex': np.nan,
                                             'delta': table.lost_revenue}])], ignore_index=True)
    frame.to_csv(path, index=False, float_format='%.10g')
    return path


def reference_lines(report: CaseReport, case: str) -> List[str]:
    """'metric: result (reference x)' for every reference figure of the given case ('noflex' | 'flex')"""
    summary = report.summary()
    lines = []
    for metric, value in report.reference.items():
        if isinstance(value, dict) and case in value and metric in summary:
            lines.append(f"{metric}: {summary[metric]:.2f} (reference {value[case]})")
    return lines
