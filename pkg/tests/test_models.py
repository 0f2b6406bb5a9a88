"""
Tests for the shared data models and configuration
"""

import pytest

from disco_scheduling_system.shared.config import load_config, get_default_config
from disco_scheduling_system.shared.exceptions import StageError, DatasetParseError, SolverLimitError
from disco_scheduling_system.shared.models import (Bus, Line, NetworkModel, CaseConfig, MarketData, Microgrid,
                                                   ScheduleSolution)
from tests.conftest import make_microgrid


def test_microgrid_dict_round_trip():
    mg = make_microgrid(horizon=3, demand=[0.5, 0.6, 0.7])
    assert Microgrid.from_dict(mg.to_dict()) == mg
    assert mg.horizon == 3
    assert mg.il_cap(2) == pytest.approx(0.2 * 0.7)


def test_network_incidence_and_lossless_copy():
    buses = tuple(Bus(k, (0.1,), 11.0, 13.0) for k in (1, 2, 3))
    lines = (Line(1, 2, 0.2, 0.3, 400.0), Line(2, 3, 0.1, 0.2, 400.0))
    network = NetworkModel(buses, lines)

    assert network.lines_from(2) == [1]
    assert network.lines_to(2) == [0]
    assert network.bus(3).bus_id == 3
    with pytest.raises(KeyError):
        network.bus(9)

    lossless = network.lossless()
    assert all(line.resistance == 0.0 for line in lossless.lines)
    assert [line.impedance for line in lossless.lines] == [0.3, 0.2]
    assert network.lines[0].resistance == 0.2
    assert NetworkModel.from_dict(network.to_dict()) == network


def test_case_config_overrides_skip_none():
    config = CaseConfig(horizon=24, pwl_segments=6)
    updated = config.with_overrides(horizon=4, pwl_segments=None, flexibility_enabled=False)
    assert updated.horizon == 4
    assert updated.pwl_segments == 6
    assert updated.flexibility_enabled is False
    assert CaseConfig.from_dict({'horizon': 3, 'unknown_key': 1}).horizon == 3


def test_market_defaults():
    market = MarketData.from_dict({'wem_price': [30], 'penalty_price': [42], 'retail_price': [36],
                                   'disco_il_bid': [60]})
    assert market.lem_price_cap == 90.0
    assert market.horizon == 1


def test_schedule_solution_keeps_integer_bus_keys():
    schedule = ScheduleSolution('optimal', 1.0, [1.0], [2.0], [0.0], [1.0], [{5: [0.1]}], [{}], [[0.0]], {})
    restored = ScheduleSolution.from_dict(schedule.to_dict())
    assert restored.disco_il == [{5: [0.1]}]


def test_stage_error_carries_exit_code():
    error = StageError("loader", DatasetParseError("lines.csv", 4, "bad value"))
    assert error.exit_code == 1
    assert "lines.csv:4" in str(error)
    assert StageError("solver", SolverLimitError("limit")).exit_code == 2
    assert StageError("report", ValueError("boom")).exit_code == 3


def test_config_merges_yaml_and_environment(tmp_path, monkeypatch):
    path = tmp_path / "config.yaml"
    path.write_text("scheduler:\n  mip_gap: 0.01\n  tolerances:\n    report: 0.001\n")
    monkeypatch.setenv('DISCO_LOG_LEVEL', 'debug')
    monkeypatch.setenv('DISCO_OUTPUT_DIR', str(tmp_path / "out"))

    config = load_config(str(path))
    assert config['scheduler']['mip_gap'] == 0.01
    assert config['scheduler']['tolerances']['report'] == 0.001
    assert config['scheduler']['tolerances']['import'] == get_default_config()['scheduler']['tolerances']['import']
    assert config['logging']['level'] == 'DEBUG'
    assert config['scheduler']['output_dir'] == str(tmp_path / "out")
