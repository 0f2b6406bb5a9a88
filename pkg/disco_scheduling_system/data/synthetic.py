"""
Seeded random toy cases for property checks and the CLI --seed option
"""

from typing import List, Optional

import numpy as np

from ..shared.models import (
    DISCO, Bus, Line, DgUnit, PvUnit, StorageUnit, Microgrid, MarketData, NetworkModel, CaseConfig
)
from .loader import CaseData, validate_case, validate_radial

V_BASE_KV = 12.66


def _round(values, digits: int = 3):
    return tuple(float(v) for v in np.round(values, digits))


def random_microgrid(rng: np.random.Generator, mg_id: str, bus_id: int, horizon: int) -> Microgrid:
    """Feasible microgrid: the exchange cap absorbs any demand/PV/DG imbalance"""
    demand = _round(rng.uniform(0.0, 1.0, horizon))
    pv = _round(rng.uniform(0.0, 0.5, horizon))
    p_max = round(float(rng.uniform(0.3, 1.5)), 3)
    ramp = round(float(rng.uniform(0.1, 0.6)), 3)
    dg = DgUnit(f"{mg_id}_dg", mg_id, bus_id, 0.0, p_max, ramp, ramp,
                round(float(rng.uniform(0.0, p_max)), 3), round(float(rng.uniform(25.0, 60.0)), 2))
    e_max = round(float(rng.uniform(0.5, 2.0)), 3)
    e_min = round(float(rng.uniform(0.0, 0.3 * e_max)), 3)
    storage = StorageUnit(e_min, e_max, round(float(rng.uniform(e_min, e_max)), 3),
                          round(float(rng.uniform(0.1, 0.6)), 3),
                          round(float(rng.uniform(0.85, 1.0)), 3), round(float(rng.uniform(0.85, 1.0)), 3))
    exchange_max = round(max(demand) + max(pv) + p_max + 0.5, 3)
    il_bid = _round(rng.uniform(30.0, 70.0, horizon), 2)
    return Microgrid(mg_id, bus_id, demand, pv, dg, storage, round(float(rng.uniform(0.0, 0.3)), 3),
                     il_bid, exchange_max)


def random_prices(rng: np.random.Generator, horizon: int, cap: float = 90.0) -> np.ndarray:
    return np.round(rng.uniform(0.0, cap, horizon), 2)


def random_case(seed: int, horizon: int = 2, buses: int = 2, microgrids: int = 1,
                disco_dgs: int = 0, pvs: int = 0, flexibility: bool = True,
                lossless: bool = False, solver_mode: str = "embedded") -> CaseData:
    """Small radial case; bus k > 1 hangs off a random earlier bus"""
    rng = np.random.default_rng(seed)
    if microgrids > max(buses - 1, 0):
        raise ValueError("each microgrid needs its own non-root bus")

    wem = random_prices(rng, horizon, 60.0) + 10.0
    market = MarketData(
        wem_price=_round(wem, 2),
        penalty_price=_round(1.4 * wem, 2),
        retail_price=_round(1.2 * wem, 2),
        disco_il_bid=_round(rng.uniform(50.0, 80.0, horizon), 2),
        lem_price_cap=90.0,
        wem_purchase_cap=20.0,
        disco_il_cap=1.0,
        disco_il_fraction=0.3
    )

    mg_buses = list(range(2, 2 + microgrids))
    mgs: List[Microgrid] = [random_microgrid(rng, f"MG{k + 1}", bus, horizon)
                            for k, bus in enumerate(mg_buses)]

    lines = []
    for bus in range(2, buses + 1):
        parent = int(rng.integers(1, bus))
        r = round(float(rng.uniform(0.05, 0.5)), 4)
        lines.append(Line(parent, bus, r, round(r * float(rng.uniform(1.0, 1.5)), 4), 400.0))

    dgs = []
    for k in range(disco_dgs):
        p_max = round(float(rng.uniform(0.3, 1.0)), 3)
        ramp = round(float(rng.uniform(0.2, 0.5)), 3)
        dgs.append(DgUnit(f"DG{k + 1}", DISCO, int(rng.integers(1, buses + 1)), 0.0, p_max, ramp, ramp,
                          round(p_max / 2, 3), round(float(rng.uniform(35.0, 60.0)), 2)))
    pv_units = [PvUnit(f"PV{k + 1}", int(rng.integers(1, buses + 1)),
                       _round(rng.uniform(0.0, 0.4, horizon))) for k in range(pvs)]

    bus_list = tuple(
        Bus(bus_id, _round(rng.uniform(0.0, 1.0, horizon)) if bus_id > 1 else (0.0,) * horizon,
            0.90 * V_BASE_KV, 1.05 * V_BASE_KV, bus_id in mg_buses,
            any(dg.bus_id == bus_id for dg in dgs), any(pv.bus_id == bus_id for pv in pv_units))
        for bus_id in range(1, buses + 1)
    )
    network = NetworkModel(bus_list, tuple(lines), tuple(dgs), tuple(pv_units), 1, V_BASE_KV)
    config = CaseConfig(horizon=horizon, flexibility_enabled=flexibility, scenario_mode="single",
                        solver_mode=solver_mode, name=f"random-{seed}")
    validate_radial(network)
    validate_case(network, mgs, market, config)
    if lossless:
        network = network.lossless()
    return network, mgs, market, config


def two_bus_case(horizon: int = 2, load: Optional[List[float]] = None, microgrid: Optional[Microgrid] = None,
                 resistance: float = 0.0, flexibility: bool = False) -> CaseData:
    """Substation plus one load bus, optionally hosting a microgrid"""
    load = list(load if load is not None else [1.0] * horizon)
    wem = tuple(30.0 + 10.0 * t for t in range(horizon))
    market = MarketData(wem, tuple(1.4 * p for p in wem), tuple(1.2 * p for p in wem),
                        (60.0,) * horizon, 90.0, 20.0, 1.0, 0.3)
    line = Line(1, 2, resistance, max(resistance, 0.1), 400.0)
    buses = (Bus(1, (0.0,) * horizon, 0.90 * V_BASE_KV, 1.05 * V_BASE_KV),
             Bus(2, tuple(load), 0.90 * V_BASE_KV, 1.05 * V_BASE_KV, has_mg=microgrid is not None))
    network = NetworkModel(buses, (line,), (), (), 1, V_BASE_KV)
    config = CaseConfig(horizon=horizon, flexibility_enabled=flexibility, scenario_mode="single",
                        name="two-bus")
    return network, [microgrid] if microgrid is not None else [], market, config
