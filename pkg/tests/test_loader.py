"""
Tests for case loading, validation and the synthetic case generator
"""

import shutil

import pytest

from disco_scheduling_system.data.loader import load_case, load_reference, validate_radial, read_table
from disco_scheduling_system.data.synthetic import random_case, two_bus_case
from disco_scheduling_system.shared.exceptions import (DatasetParseError, DatasetReferenceError,
                                                       DatasetValidationError, CycleError, DisconnectedBusError)
from disco_scheduling_system.shared.models import Bus, Line, NetworkModel


@pytest.fixture
def case_copy(tmp_path, case_dir):
    target = tmp_path / "case"
    shutil.copytree(case_dir, target)
    return target


def test_bundled_case_loads(case_dir):
    network, microgrids, market, config = load_case(case_dir)

    assert len(network.buses) == 33
    assert len(network.lines) == 32
    assert [mg.mg_id for mg in microgrids] == ["MG1", "MG2", "MG3"]
    assert config.horizon == 24
    assert market.horizon == 24
    assert network.bus(1).v_max == pytest.approx(1.05 * 12.66)
    assert market.penalty_price[0] == pytest.approx(1.4 * market.wem_price[0])
    assert all(bus.has_mg for bus in network.buses if bus.bus_id in (18, 22, 33))
    assert config.scenario_file.endswith("scenarios.csv")


def test_horizon_override_truncates_hourly_data(case_dir):
    network, microgrids, market, config = load_case(case_dir, {'horizon': 4})
    assert config.horizon == 4
    assert network.horizon == 4
    assert market.horizon == 4
    assert all(mg.horizon == 4 for mg in microgrids)


def test_bad_number_reports_file_and_line(case_copy):
    path = case_copy / "lines.csv"
    rows = path.read_text().splitlines()
    header = next(k for k, row in enumerate(rows) if row.startswith("from_bus"))
    rows[header + 3] = "3,4,abc,0.4,600"
    path.write_text("\n".join(rows) + "\n")

    with pytest.raises(DatasetParseError) as info:
        load_case(str(case_copy))
    assert info.value.line == header + 4
    assert "abc" in str(info.value)


def test_unknown_bus_reference(case_copy):
    path = case_copy / "dgs.csv"
    path.write_text(path.read_text().replace("DG1,7,", "DG1,77,"))
    with pytest.raises(DatasetReferenceError):
        load_case(str(case_copy))


def test_invalid_storage_rejected(case_copy):
    path = case_copy / "microgrids.csv"
    path.write_text(path.read_text().replace("0.2,2.0,1.0,0.5,0.95,0.95", "0.2,2.0,3.0,0.5,0.95,0.95", 1))
    with pytest.raises(DatasetValidationError):
        load_case(str(case_copy))


def test_read_table_skips_comments(tmp_path):
    path = tmp_path / "table.csv"
    path.write_text("# comment\nname,value\n\n# another\na, 1\nb,2\n")
    table = read_table(str(path), ['name', 'value'])
    assert table.text('name') == ['a', 'b']
    assert list(table.numeric('value')) == [1.0, 2.0]
    assert table.line(1) == 6


def test_loop_is_rejected():
    buses = tuple(Bus(k, (0.0,), 11.0, 13.0) for k in (1, 2, 3))
    lines = (Line(1, 2, 0.1, 0.2, 400.0), Line(2, 3, 0.1, 0.2, 400.0), Line(3, 1, 0.1, 0.2, 400.0))
    with pytest.raises(CycleError):
        validate_radial(NetworkModel(buses, lines))


def test_island_is_rejected():
    buses = tuple(Bus(k, (0.0,), 11.0, 13.0) for k in (1, 2, 3, 4))
    lines = (Line(1, 2, 0.1, 0.2, 400.0), Line(3, 4, 0.1, 0.2, 400.0))
    with pytest.raises(DisconnectedBusError):
        validate_radial(NetworkModel(buses, lines))


def test_reference_figures_are_available(case_dir):
    reference = load_reference(case_dir)
    assert reference['profit']['noflex'] == pytest.approx(7849.32)
    assert reference['lem_price_hour1_noflex'] == 90.0


def test_random_case_is_seeded():
    first = random_case(7, horizon=3, buses=4, microgrids=2, disco_dgs=1, pvs=1)
    second = random_case(7, horizon=3, buses=4, microgrids=2, disco_dgs=1, pvs=1)
    assert first == second
    network, microgrids, market, config = first
    assert len(network.lines) == 3
    assert {mg.attached_bus for mg in microgrids} == {2, 3}
    assert config.scenario_mode == "single"


def test_two_bus_case_shape(microgrid):
    network, microgrids, market, config = two_bus_case(load=[1.0, 0.8], microgrid=microgrid)
    assert network.bus(2).has_mg
    assert microgrids == [microgrid]
    assert network.lines[0].resistance == 0.0
