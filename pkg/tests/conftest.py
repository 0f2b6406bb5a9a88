"""
Shared fixtures: bundled case path, small microgrids and seeded generators
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from disco_scheduling_system.shared.models import DgUnit, StorageUnit, Microgrid

CASE_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                        'disco_scheduling_system', 'data', 'ieee33')


def make_microgrid(horizon: int = 2, mg_id: str = "MG1", bus_id: int = 2, demand=None, pv=None,
                   dg_bid: float = 38.0, dg_max: float = 0.6, il_bid: float = 45.5,
                   il_fraction: float = 0.2, exchange_max: float = 2.0) -> Microgrid:
    """Microgrid whose hours decouple: ramp limits equal p_max and the storage energy is pinned"""
    demand = tuple(demand if demand is not None else [1.0] * horizon)
    pv = tuple(pv if pv is not None else [0.0] * horizon)
    dg = DgUnit(f"{mg_id}_dg", mg_id, bus_id, 0.0, dg_max, dg_max, dg_max, 0.3, dg_bid)
    storage = StorageUnit(1.0, 1.0, 1.0, 0.2, 1.0, 1.0)
    return Microgrid(mg_id, bus_id, demand, pv, dg, storage, il_fraction, (il_bid,) * horizon, exchange_max)


@pytest.fixture
def case_dir():
    return CASE_DIR


@pytest.fixture
def microgrid():
    return make_microgrid(demand=[1.0, 1.0], pv=[0.2, 0.0])


@pytest.fixture
def storage_microgrid():
    """Two-hour microgrid with a working battery"""
    dg = DgUnit("MGS_dg", "MGS", 2, 0.0, 0.8, 0.3, 0.3, 0.2, 40.0)
    storage = StorageUnit(0.1, 1.0, 0.5, 0.3, 0.95, 0.9)
    return Microgrid("MGS", 2, (0.7, 0.9), (0.1, 0.0), dg, storage, 0.1, (50.0, 55.0), 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
