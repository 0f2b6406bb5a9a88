"""
Case loader: case.yaml plus one CSV file per entity class

Bus voltages are given in per unit in buses.csv and stored in kV; line
currents are stored in amperes. Every hourly series is checked against the
case horizon.
"""

import logging
import os
from typing import Dict, Any, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
import yaml

from ..shared.exceptions import (
    DatasetParseError, DatasetValidationError, DatasetReferenceError, CycleError,
    DisconnectedBusError
)
from ..shared.models import (
    DISCO, SOLVER_MODES, PV_FAMILIES, Bus, Line, DgUnit, PvUnit, StorageUnit, Microgrid,
    MarketData, NetworkModel, CaseConfig
)

logger = logging.getLogger("stage.loader")

DEFAULT_FILES = {
    'buses': 'buses.csv',
    'lines': 'lines.csv',
    'dgs': 'dgs.csv',
    'pvs': 'pvs.csv',
    'microgrids': 'microgrids.csv',
    'hourly': 'hourly.csv',
    'mg_profiles': 'mg_profiles.csv'
}

PENALTY_FACTOR = 1.4
RETAIL_FACTOR = 1.2
MG_IL_BID_FACTOR = 0.8
MG_IL_CAP_FRACTION = 0.1

CaseData = Tuple[NetworkModel, List[Microgrid], MarketData, CaseConfig]


class _Table:
    """A parsed CSV file that remembers the source line of every data row"""

    def __init__(self, path: str, frame: pd.DataFrame, lines: List[int]):
        self.path = path
        self.frame = frame
        self.lines = lines

    def __len__(self):
        return len(self.frame)

    def line(self, row: int) -> int:
        return self.lines[row]

    def has(self, column: str) -> bool:
        return column in self.frame.columns

    def numeric(self, column: str) -> np.ndarray:
        if column not in self.frame.columns:
            raise DatasetParseError(self.path, None, f"missing column '{column}'")
        values = pd.to_numeric(self.frame[column], errors='coerce')
        bad = np.flatnonzero(values.isna().to_numpy())
        if bad.size:
            row = int(bad[0])
            raise DatasetParseError(self.path, self.line(row),
                                    f"column '{column}' has non-numeric value '{self.frame[column].iloc[row]}'")
        return values.to_numpy(dtype=float)

    def text(self, column: str) -> List[str]:
        if column not in self.frame.columns:
            raise DatasetParseError(self.path, None, f"missing column '{column}'")
        return [str(v).strip() for v in self.frame[column]]


def read_table(path: str, required: Sequence[str]) -> _Table:
    if not os.path.exists(path):
        raise DatasetParseError(path, None, "file not found")

    # Source line numbers of the header and data rows (comments and blanks skipped)
    with open(path, 'r') as f:
        content_lines = [k for k, raw in enumerate(f, start=1)
                         if raw.strip() and not raw.lstrip().startswith('#')]

    try:
        frame = pd.read_csv(path, comment='#', skipinitialspace=True, dtype=str,
                            skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise DatasetParseError(path, None, "file is empty")
    except pd.errors.ParserError as e:
        raise DatasetParseError(path, None, str(e))

    frame.columns = [str(c).strip() for c in frame.columns]
    frame = frame.apply(lambda column: column.str.strip())
    lines = content_lines[1:]
    for k in range(len(frame)):
        if frame.iloc[k].isna().any():
            missing = [c for c in frame.columns if pd.isna(frame.iloc[k][c])]
            raise DatasetParseError(path, lines[k] if k < len(lines) else None,
                                    f"missing value for {', '.join(missing)}")
    for column in required:
        if column not in frame.columns:
            raise DatasetParseError(path, content_lines[0] if content_lines else None,
                                    f"missing column '{column}'")
    return _Table(path, frame, lines)


def _hourly_series(table: _Table, column: str, horizon: int) -> Optional[Tuple[float, ...]]:
    if not table.has(column):
        return None
    values = table.numeric(column)
    if len(values) != horizon:
        raise DatasetValidationError(f"{os.path.basename(table.path)}:{column}",
                                     f"has {len(values)} hours, horizon is {horizon}")
    return tuple(float(v) for v in values)


def _load_yaml(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise DatasetParseError(path, None, "file not found")
    try:
        with open(path, 'r') as f:
            return yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        raise DatasetParseError(path, mark.line + 1 if mark else None, str(e))


def load_case(case_dir: str, overrides: Optional[Dict[str, Any]] = None) -> CaseData:
    """Load and validate a case directory; overrides replace case.yaml config keys"""
    case_path = os.path.join(case_dir, 'case.yaml')
    case = _load_yaml(case_path)
    files = {**DEFAULT_FILES, **(case.get('files') or {})}

    def path_of(key: str) -> Optional[str]:
        name = files.get(key)
        return os.path.join(case_dir, name) if name else None

    config = CaseConfig.from_dict({**(case.get('config') or {}), 'name': case.get('name', 'case')})
    if overrides:
        config = config.with_overrides(**overrides)
    if config.scenario_file and not os.path.isabs(config.scenario_file):
        config = config.with_overrides(scenario_file=os.path.join(case_dir, config.scenario_file))
    horizon = config.horizon
    v_base = float(case.get('v_base_kv', 12.66))
    root_bus = int(case.get('root_bus', 1))

    hourly = read_table(path_of('hourly'), ['hour', 'load_factor', 'pv_factor', 'wem_price',
                                             'disco_il_bid'])
    if len(hourly) < horizon:
        raise DatasetValidationError("hourly.csv", f"has {len(hourly)} hours, horizon is {horizon}")
    if len(hourly) > horizon:
        hourly = _Table(hourly.path, hourly.frame.iloc[:horizon].reset_index(drop=True),
                        hourly.lines[:horizon])
    load_factor = _hourly_series(hourly, 'load_factor', horizon)
    pv_factor = _hourly_series(hourly, 'pv_factor', horizon)
    wem = _hourly_series(hourly, 'wem_price', horizon)
    il_bid = _hourly_series(hourly, 'disco_il_bid', horizon)
    penalty = _hourly_series(hourly, 'penalty_price', horizon) or tuple(PENALTY_FACTOR * p for p in wem)
    retail = _hourly_series(hourly, 'retail_price', horizon) or tuple(RETAIL_FACTOR * p for p in wem)

    market_section = case.get('market') or {}
    market = MarketData(
        wem_price=wem, penalty_price=penalty, retail_price=retail, disco_il_bid=il_bid,
        lem_price_cap=float(market_section.get('lem_price_cap', 90.0)),
        wem_purchase_cap=float(market_section.get('wem_purchase_cap', 20.0)),
        disco_il_cap=float(market_section.get('disco_il_cap', 1.0)),
        disco_il_fraction=float(market_section.get('disco_il_fraction', 0.3))
    )

    buses_table = read_table(path_of('buses'), ['bus_id', 'load_mw', 'v_min_pu', 'v_max_pu'])
    bus_ids = [int(b) for b in buses_table.numeric('bus_id')]
    load_mw = buses_table.numeric('load_mw')
    v_min = buses_table.numeric('v_min_pu') * v_base
    v_max = buses_table.numeric('v_max_pu') * v_base
    if len(set(bus_ids)) != len(bus_ids):
        dup = next(b for b in bus_ids if bus_ids.count(b) > 1)
        raise DatasetValidationError(f"bus {dup}", "duplicate bus id")
    known_buses = set(bus_ids)

    def check_bus(entity: str, bus_id: int):
        if bus_id not in known_buses:
            raise DatasetReferenceError(entity, f"bus {bus_id}")

    lines: List[Line] = []
    if path_of('lines') and (os.path.exists(path_of('lines')) or len(bus_ids) > 1):
        table = read_table(path_of('lines'), ['from_bus', 'to_bus', 'r_ohm', 'z_ohm', 'i_max_a'])
        for k, (fb, tb, r, z, imax) in enumerate(zip(table.numeric('from_bus'), table.numeric('to_bus'),
                                                     table.numeric('r_ohm'), table.numeric('z_ohm'),
                                                     table.numeric('i_max_a'))):
            line = Line(int(fb), int(tb), float(r), float(z), float(imax))
            check_bus(f"line {line.name}", line.from_bus)
            check_bus(f"line {line.name}", line.to_bus)
            lines.append(line)

    dgs: List[DgUnit] = []
    if path_of('dgs') and os.path.exists(path_of('dgs')):
        table = read_table(path_of('dgs'), ['unit_id', 'bus_id', 'p_min', 'p_max', 'ramp_up',
                                             'ramp_down', 'p_initial', 'bid'])
        columns = {c: table.numeric(c) for c in ('bus_id', 'p_min', 'p_max', 'ramp_up', 'ramp_down',
                                                  'p_initial', 'bid')}
        for k, unit_id in enumerate(table.text('unit_id')):
            dg = DgUnit(unit_id, DISCO, int(columns['bus_id'][k]),
                        *(float(columns[c][k]) for c in ('p_min', 'p_max', 'ramp_up', 'ramp_down',
                                                         'p_initial', 'bid')))
            check_bus(f"dg {unit_id}", dg.bus_id)
            dgs.append(dg)

    pvs: List[PvUnit] = []
    if path_of('pvs') and os.path.exists(path_of('pvs')):
        table = read_table(path_of('pvs'), ['pv_id', 'bus_id', 'capacity_mw'])
        for pv_id, bus_id, cap in zip(table.text('pv_id'), table.numeric('bus_id'),
                                      table.numeric('capacity_mw')):
            pv = PvUnit(pv_id, int(bus_id), tuple(float(cap) * f for f in pv_factor))
            check_bus(f"pv {pv_id}", pv.bus_id)
            pvs.append(pv)

    microgrids = _load_microgrids(path_of('microgrids'), path_of('mg_profiles'), horizon,
                                  il_bid, check_bus)

    mg_buses = {mg.attached_bus for mg in microgrids}
    dg_buses = {dg.bus_id for dg in dgs}
    pv_buses = {pv.bus_id for pv in pvs}
    buses = tuple(
        Bus(bus_id, tuple(float(load_mw[k]) * f for f in load_factor), float(v_min[k]), float(v_max[k]),
            bus_id in mg_buses, bus_id in dg_buses, bus_id in pv_buses)
        for k, bus_id in enumerate(bus_ids)
    )

    network = NetworkModel(buses, tuple(lines), tuple(dgs), tuple(pvs), root_bus, v_base)
    validate_case(network, microgrids, market, config)
    validate_radial(network)

    logger.info(f"Loaded case {config.name}: {len(buses)} buses, {len(lines)} lines, "
                f"{len(microgrids)} microgrids, {len(dgs)} DGs, {len(pvs)} PVs")
    return network, microgrids, market, config


def _load_microgrids(mg_path: Optional[str], profile_path: Optional[str], horizon: int,
                     disco_il_bid: Tuple[float, ...], check_bus) -> List[Microgrid]:
    if not mg_path or not os.path.exists(mg_path):
        return []

    table = read_table(mg_path, ['mg_id', 'bus_id', 'exchange_max', 'dg_p_min', 'dg_p_max',
                                  'dg_ramp_up', 'dg_ramp_down', 'dg_p_initial', 'dg_bid', 'e_min',
                                  'e_max', 'e_initial', 'p_rate_max', 'eta_ch', 'eta_dch'])
    if len(table) == 0:
        return []
    profiles = read_table(profile_path, ['hour', 'mg_id', 'demand', 'pv'])
    profile_ids = profiles.text('mg_id')
    hours = profiles.numeric('hour')
    demand = profiles.numeric('demand')
    pv = profiles.numeric('pv')
    bid = profiles.numeric('il_bid') if profiles.has('il_bid') else None

    ids = table.text('mg_id')
    unknown = sorted(set(profile_ids) - set(ids))
    if unknown:
        raise DatasetReferenceError("mg_profiles.csv", f"microgrid {unknown[0]}")

    numeric = {c: table.numeric(c) for c in table.frame.columns if c != 'mg_id'}
    microgrids = []
    for k, mg_id in enumerate(ids):
        rows = sorted((int(hours[r]), r) for r, name in enumerate(profile_ids) if name == mg_id)
        rows = [r for hour, r in rows if 1 <= hour <= horizon]
        if len(rows) != horizon:
            raise DatasetValidationError(f"microgrid {mg_id}",
                                         f"profile has {len(rows)} hours, horizon is {horizon}")
        il_bids = (tuple(float(bid[r]) for r in rows) if bid is not None
                   else tuple(MG_IL_BID_FACTOR * b for b in disco_il_bid))
        bus_id = int(numeric['bus_id'][k])
        check_bus(f"microgrid {mg_id}", bus_id)
        dg = DgUnit(f"{mg_id}_dg", mg_id, bus_id,
                    *(float(numeric[c][k]) for c in ('dg_p_min', 'dg_p_max', 'dg_ramp_up',
                                                     'dg_ramp_down', 'dg_p_initial', 'dg_bid')))
        storage = StorageUnit(*(float(numeric[c][k]) for c in ('e_min', 'e_max', 'e_initial',
                                                               'p_rate_max', 'eta_ch', 'eta_dch')))
        fraction = float(numeric['il_cap_fraction'][k]) if 'il_cap_fraction' in numeric else MG_IL_CAP_FRACTION
        microgrids.append(Microgrid(
            mg_id=mg_id, attached_bus=bus_id,
            demand=tuple(float(demand[r]) for r in rows),
            pv=tuple(float(pv[r]) for r in rows),
            dg=dg, storage=storage, il_cap_fraction=fraction, il_bid=il_bids,
            exchange_max=float(numeric['exchange_max'][k])
        ))
    return microgrids


def _check_dg(entity: str, dg: DgUnit):
    if not 0.0 <= dg.p_min <= dg.p_max:
        raise DatasetValidationError(entity, f"needs 0 <= p_min <= p_max, got {dg.p_min}, {dg.p_max}")
    if dg.ramp_up <= 0.0 or dg.ramp_down <= 0.0:
        raise DatasetValidationError(entity, "ramp limits must be positive")
    if not dg.p_min <= dg.p_initial <= dg.p_max:
        raise DatasetValidationError(entity, f"initial output {dg.p_initial} outside [p_min, p_max]")
    if dg.bid < 0.0:
        raise DatasetValidationError(entity, "bid must be non-negative")


def validate_case(network: NetworkModel, microgrids: List[Microgrid], market: MarketData,
                  config: CaseConfig):
    """Check every entity invariant and the cross references between entities"""
    horizon = config.horizon
    if horizon < 1:
        raise DatasetValidationError("case", "horizon must be at least 1")
    if config.pwl_segments < 1:
        raise DatasetValidationError("case", "pwl_segments must be at least 1")
    for key in ('big_m_primal', 'big_m_dual'):
        value = getattr(config, key)
        if value is not None and value <= 0.0:
            raise DatasetValidationError("case", f"{key} must be positive")
    if config.solver_mode not in SOLVER_MODES:
        raise DatasetValidationError("case", f"unknown solver mode '{config.solver_mode}'")
    if config.pv_family not in PV_FAMILIES:
        raise DatasetValidationError("case", f"unknown PV family '{config.pv_family}'")

    bus_ids = set()
    for bus in network.buses:
        entity = f"bus {bus.bus_id}"
        if bus.bus_id in bus_ids:
            raise DatasetValidationError(entity, "duplicate bus id")
        bus_ids.add(bus.bus_id)
        if len(bus.base_load) != horizon:
            raise DatasetValidationError(entity, f"load profile has {len(bus.base_load)} hours")
        if min(bus.base_load, default=0.0) < 0.0:
            raise DatasetValidationError(entity, "negative load")
        if bus.v_min > bus.v_max:
            raise DatasetValidationError(entity, f"v_min {bus.v_min} above v_max {bus.v_max}")
        if bus.v_min < 0.0:
            raise DatasetValidationError(entity, "negative voltage bound")
    if network.buses and network.root_bus not in bus_ids:
        raise DatasetReferenceError("network root", f"bus {network.root_bus}")

    for line in network.lines:
        entity = f"line {line.name}"
        for end in (line.from_bus, line.to_bus):
            if end not in bus_ids:
                raise DatasetReferenceError(entity, f"bus {end}")
        if line.resistance <= 0.0 or line.impedance < line.resistance:
            raise DatasetValidationError(entity, f"needs Z >= R > 0, got R={line.resistance}, Z={line.impedance}")
        if line.current_max <= 0.0:
            raise DatasetValidationError(entity, "current limit must be positive")

    for dg in network.dgs:
        if dg.bus_id not in bus_ids:
            raise DatasetReferenceError(f"dg {dg.unit_id}", f"bus {dg.bus_id}")
        _check_dg(f"dg {dg.unit_id}", dg)
    for pv in network.pvs:
        if pv.bus_id not in bus_ids:
            raise DatasetReferenceError(f"pv {pv.pv_id}", f"bus {pv.bus_id}")
        if len(pv.profile) != horizon or min(pv.profile, default=0.0) < 0.0:
            raise DatasetValidationError(f"pv {pv.pv_id}", "profile must be non-negative with one value per hour")

    attached: Dict[int, str] = {}
    for mg in microgrids:
        entity = f"microgrid {mg.mg_id}"
        if mg.attached_bus not in bus_ids:
            raise DatasetReferenceError(entity, f"bus {mg.attached_bus}")
        if mg.attached_bus in attached:
            raise DatasetValidationError(entity, f"bus {mg.attached_bus} already hosts {attached[mg.attached_bus]}")
        attached[mg.attached_bus] = mg.mg_id
        for name, series in (('demand', mg.demand), ('pv', mg.pv), ('il_bid', mg.il_bid)):
            if len(series) != horizon:
                raise DatasetValidationError(entity, f"{name} profile has {len(series)} hours")
            if min(series) < 0.0:
                raise DatasetValidationError(entity, f"negative {name}")
        if not 0.0 <= mg.il_cap_fraction <= 1.0:
            raise DatasetValidationError(entity, "il_cap_fraction must lie in [0, 1]")
        if mg.exchange_max <= 0.0:
            raise DatasetValidationError(entity, "exchange_max must be positive")
        _check_dg(f"{entity} dg", mg.dg)
        es = mg.storage
        if not es.e_min <= es.e_initial <= es.e_max:
            raise DatasetValidationError(f"{entity} storage", "needs e_min <= e_initial <= e_max")
        if es.p_rate_max <= 0.0:
            raise DatasetValidationError(f"{entity} storage", "p_rate_max must be positive")
        if not (0.0 < es.eta_ch <= 1.0 and 0.0 < es.eta_dch <= 1.0):
            raise DatasetValidationError(f"{entity} storage", "efficiencies must lie in (0, 1]")

    for bus in network.buses:
        if bus.has_mg != (bus.bus_id in attached):
            raise DatasetValidationError(f"bus {bus.bus_id}", "has_mg flag disagrees with microgrid attachments")

    for name in ('wem_price', 'penalty_price', 'retail_price', 'disco_il_bid'):
        series = getattr(market, name)
        if len(series) != horizon:
            raise DatasetValidationError(f"market {name}", f"has {len(series)} hours, horizon is {horizon}")
        if min(series) < 0.0:
            raise DatasetValidationError(f"market {name}", "prices must be non-negative")
    for name in ('lem_price_cap', 'wem_purchase_cap', 'disco_il_cap'):
        if getattr(market, name) <= 0.0:
            raise DatasetValidationError(f"market {name}", "must be positive")
    if not 0.0 <= market.disco_il_fraction <= 1.0:
        raise DatasetValidationError("market disco_il_fraction", "must lie in [0, 1]")


def validate_radial(network: NetworkModel):
    """Raise unless the lines form a tree over all buses rooted at the substation"""
    graph = nx.MultiGraph()
    graph.add_nodes_from(network.bus_ids)
    graph.add_edges_from((line.from_bus, line.to_bus) for line in network.lines)

    if graph.number_of_nodes() == 0:
        return
    if network.root_bus not in graph:
        raise DisconnectedBusError(f"root bus {network.root_bus} is not in the network")

    if not nx.is_forest(graph):
        cycle = nx.find_cycle(graph)
        path = " -> ".join(str(edge[0]) for edge in cycle)
        raise CycleError(f"lines form a loop through buses {path}")

    missing = sorted(set(network.bus_ids) - nx.node_connected_component(graph, network.root_bus))
    if missing:
        raise DisconnectedBusError(f"buses {missing} are not connected to bus {network.root_bus}")


def load_reference(case_dir: str) -> Dict[str, Any]:
    """Reference figures stored with a case (annotations, never asserted)"""
    path = os.path.join(case_dir, 'case.yaml')
    return dict(_load_yaml(path).get('reference') or {})
