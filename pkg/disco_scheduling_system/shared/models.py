"""
Core data models for the scheduling system

All models are frozen once built; the loader validates them and they are then
shared read-only across the pipeline.
"""

from dataclasses import dataclass, field, asdict, replace
from typing import Dict, Any, List, Optional, Tuple

DISCO = "disco"
SOLVER_MODES = ("embedded", "highs", "export")
PV_FAMILIES = ("beta", "truncnorm")


def _floats(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class Bus:
    """Distribution network bus"""
    bus_id: int
    base_load: Tuple[float, ...]  # MW per hour, before scenario scaling
    v_min: float  # kV
    v_max: float  # kV
    has_mg: bool = False
    has_dg: bool = False
    has_pv: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Bus':
        return cls(
            bus_id=int(data['bus_id']),
            base_load=_floats(data['base_load']),
            v_min=float(data['v_min']),
            v_max=float(data['v_max']),
            has_mg=bool(data.get('has_mg', False)),
            has_dg=bool(data.get('has_dg', False)),
            has_pv=bool(data.get('has_pv', False))
        )


@dataclass(frozen=True)
class Line:
    """Radial feeder section between two buses"""
    from_bus: int
    to_bus: int
    resistance: float  # ohm
    impedance: float  # ohm, magnitude
    current_max: float  # A

    @property
    def name(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Line':
        return cls(
            from_bus=int(data['from_bus']),
            to_bus=int(data['to_bus']),
            resistance=float(data['resistance']),
            impedance=float(data['impedance']),
            current_max=float(data['current_max'])
        )


@dataclass(frozen=True)
class DgUnit:
    """Dispatchable generator owned by the Disco or by a microgrid"""
    unit_id: str
    owner: str  # "disco" | microgrid id
    bus_id: int
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    p_initial: float
    bid: float  # $/MWh

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DgUnit':
        return cls(
            unit_id=str(data['unit_id']),
            owner=str(data['owner']),
            bus_id=int(data['bus_id']),
            p_min=float(data['p_min']),
            p_max=float(data['p_max']),
            ramp_up=float(data['ramp_up']),
            ramp_down=float(data['ramp_down']),
            p_initial=float(data['p_initial']),
            bid=float(data['bid'])
        )


@dataclass(frozen=True)
class PvUnit:
    """Disco-side PV plant with its hourly forecast"""
    pv_id: str
    bus_id: int
    profile: Tuple[float, ...]  # MW per hour

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PvUnit':
        return cls(pv_id=str(data['pv_id']), bus_id=int(data['bus_id']),
                   profile=_floats(data['profile']))


@dataclass(frozen=True)
class StorageUnit:
    """Microgrid energy storage"""
    e_min: float  # MWh
    e_max: float
    e_initial: float
    p_rate_max: float  # MW, charging and discharging
    eta_ch: float
    eta_dch: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'StorageUnit':
        return cls(**{k: float(data[k]) for k in
                      ('e_min', 'e_max', 'e_initial', 'p_rate_max', 'eta_ch', 'eta_dch')})


@dataclass(frozen=True)
class Microgrid:
    """Lower-level decision maker attached to one bus"""
    mg_id: str
    attached_bus: int
    demand: Tuple[float, ...]  # MW per hour
    pv: Tuple[float, ...]  # MW per hour, forecast
    dg: DgUnit
    storage: StorageUnit
    il_cap_fraction: float
    il_bid: Tuple[float, ...]  # $/MWh per hour
    exchange_max: float  # MW

    @property
    def horizon(self) -> int:
        return len(self.demand)

    def il_cap(self, t: int) -> float:
        return self.il_cap_fraction * self.demand[t]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['dg'] = self.dg.to_dict()
        data['storage'] = self.storage.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Microgrid':
        return cls(
            mg_id=str(data['mg_id']),
            attached_bus=int(data['attached_bus']),
            demand=_floats(data['demand']),
            pv=_floats(data['pv']),
            dg=DgUnit.from_dict(data['dg']),
            storage=StorageUnit.from_dict(data['storage']),
            il_cap_fraction=float(data['il_cap_fraction']),
            il_bid=_floats(data['il_bid']),
            exchange_max=float(data['exchange_max'])
        )


@dataclass(frozen=True)
class MarketData:
    """Exogenous prices and trading caps"""
    wem_price: Tuple[float, ...]
    penalty_price: Tuple[float, ...]
    retail_price: Tuple[float, ...]
    disco_il_bid: Tuple[float, ...]
    lem_price_cap: float = 90.0
    wem_purchase_cap: float = 20.0
    disco_il_cap: float = 1.0
    disco_il_fraction: float = 0.3

    @property
    def horizon(self) -> int:
        return len(self.wem_price)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MarketData':
        return cls(
            wem_price=_floats(data['wem_price']),
            penalty_price=_floats(data['penalty_price']),
            retail_price=_floats(data['retail_price']),
            disco_il_bid=_floats(data['disco_il_bid']),
            lem_price_cap=float(data.get('lem_price_cap', 90.0)),
            wem_purchase_cap=float(data.get('wem_purchase_cap', 20.0)),
            disco_il_cap=float(data.get('disco_il_cap', 1.0)),
            disco_il_fraction=float(data.get('disco_il_fraction', 0.3))
        )


@dataclass(frozen=True)
class NetworkModel:
    """Radial distribution network with the Disco's own resources"""
    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...]
    dgs: Tuple[DgUnit, ...] = ()
    pvs: Tuple[PvUnit, ...] = ()
    root_bus: int = 1
    v_base_kv: float = 12.66

    @property
    def horizon(self) -> int:
        return len(self.buses[0].base_load) if self.buses else 0

    @property
    def bus_ids(self) -> List[int]:
        return [bus.bus_id for bus in self.buses]

    def bus(self, bus_id: int) -> Bus:
        for bus in self.buses:
            if bus.bus_id == bus_id:
                return bus
        raise KeyError(bus_id)

    def lines_from(self, bus_id: int) -> List[int]:
        """Indices of lines whose sending end is the bus"""
        return [k for k, line in enumerate(self.lines) if line.from_bus == bus_id]

    def lines_to(self, bus_id: int) -> List[int]:
        """Indices of lines whose receiving end is the bus"""
        return [k for k, line in enumerate(self.lines) if line.to_bus == bus_id]

    def dgs_at(self, bus_id: int) -> List[DgUnit]:
        return [dg for dg in self.dgs if dg.bus_id == bus_id]

    def pvs_at(self, bus_id: int) -> List[PvUnit]:
        return [pv for pv in self.pvs if pv.bus_id == bus_id]

    def lossless(self) -> 'NetworkModel':
        """Copy of the network with every line resistance set to zero"""
        return replace(self, lines=tuple(replace(line, resistance=0.0) for line in self.lines))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'buses': [bus.to_dict() for bus in self.buses],
            'lines': [line.to_dict() for line in self.lines],
            'dgs': [dg.to_dict() for dg in self.dgs],
            'pvs': [pv.to_dict() for pv in self.pvs],
            'root_bus': self.root_bus,
            'v_base_kv': self.v_base_kv
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NetworkModel':
        return cls(
            buses=tuple(Bus.from_dict(b) for b in data['buses']),
            lines=tuple(Line.from_dict(l) for l in data['lines']),
            dgs=tuple(DgUnit.from_dict(d) for d in data.get('dgs', [])),
            pvs=tuple(PvUnit.from_dict(p) for p in data.get('pvs', [])),
            root_bus=int(data.get('root_bus', 1)),
            v_base_kv=float(data.get('v_base_kv', 12.66))
        )


@dataclass(frozen=True)
class CaseConfig:
    """Case and solver settings"""
    horizon: int = 24
    flexibility_enabled: bool = True
    big_m_primal: Optional[float] = None  # None -> per-pair default
    big_m_dual: Optional[float] = None
    pwl_segments: int = 6
    solver_mode: str = "embedded"
    initial_purchase: Optional[float] = None  # P^E before hour 1; None skips the t=1 ramp rows
    initial_exchange: float = 0.0  # P^MG before hour 1
    scenario_mode: str = "generative"  # "generative" | "file" | "single"
    scenario_file: Optional[str] = None
    normalize_probabilities: bool = False
    load_sigma: float = 0.1
    pv_family: str = "beta"
    pv_mean_clearness: float = 0.6
    pv_std: float = 0.15
    report_scenario: Optional[int] = None  # None -> most probable scenario
    mip_gap: float = 1e-6
    node_limit: int = 100000
    time_limit: float = 600.0
    name: str = "case"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CaseConfig':
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    def with_overrides(self, **overrides) -> 'CaseConfig':
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class ScheduleSolution:
    """Optimal upper/lower-level schedule extracted from a solved MILP"""
    status: str
    objective: float
    wem_purchase: List[float]  # P^E per t
    lem_price: List[float]  # rho^LEM per t
    delta_f: List[float]  # Delta^F per t (zeros when flexibility is off)
    probabilities: List[float]
    disco_il: List[Dict[int, List[float]]]  # per scenario: bus -> per t
    disco_dg: List[Dict[str, List[float]]]  # per scenario: unit -> per t
    losses: List[List[float]]  # per scenario: total loss per t
    mg_schedule: Dict[str, Dict[str, List[float]]]  # mg -> family -> per t
    duality_revenue: Dict[str, float] = field(default_factory=dict)
    line_flows: List[Dict[str, Dict[str, List[float]]]] = field(default_factory=list)  # per scenario: line -> end -> per t
    warnings: List[str] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['disco_il'] = [{str(k): v for k, v in per_s.items()} for per_s in self.disco_il]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScheduleSolution':
        payload = dict(data)
        payload['disco_il'] = [{int(k): v for k, v in per_s.items()} for per_s in data['disco_il']]
        return cls(**payload)
