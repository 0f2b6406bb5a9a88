"""
Tests for the piecewise-linear square approximation and the flow block
"""

import numpy as np
import pytest

from disco_scheduling_system.milp.branch_and_bound import solve_milp, SolveOptions
from disco_scheduling_system.milp.model import MilpBuilder
from disco_scheduling_system.network.flow import PwlApprox, BusInjection, emit_flow_block, emit_line_rows, FlowVarSet
from disco_scheduling_system.shared.exceptions import ModelBuildError
from disco_scheduling_system.shared.models import Bus, Line, NetworkModel


@pytest.mark.parametrize("segments", [2, 4, 6, 8])
@pytest.mark.parametrize("lower,upper", [(0.0, 2.0), (-0.6, 0.6), (11.4, 13.3)])
def test_chord_and_tangent_error_bounds(segments, lower, upper):
    pwl = PwlApprox(lower, upper, segments)
    x = np.linspace(lower, upper, 1000)
    bound = (upper - lower) ** 2 / (4.0 * segments ** 2)
    assert pwl.max_error() == pytest.approx(bound)

    chord_gap = pwl.evaluate(x) - x ** 2
    assert chord_gap.min() >= -1e-9
    assert chord_gap.max() <= bound + 1e-9
    tangent_gap = x ** 2 - pwl.lower_envelope(x)
    assert tangent_gap.min() >= -1e-9
    assert tangent_gap.max() <= bound + 1e-9

    slope, intercept = pwl.secant()
    assert np.all(slope * x + intercept >= x ** 2 - 1e-9)
    assert np.all(np.diff(pwl.slopes) > 0.0)


def test_chord_at_segment_midpoint():
    pwl = PwlApprox(0.0, 2.0, 4)
    assert float(pwl.evaluate(1.25)) == pytest.approx(1.625)
    assert float(pwl.evaluate(1.25)) - 1.25 ** 2 == pytest.approx(pwl.max_error())
    assert float(pwl.evaluate(1.5)) == pytest.approx(2.25)


def test_invalid_approximations():
    with pytest.raises(ModelBuildError):
        PwlApprox(0.0, 1.0, 0)
    with pytest.raises(ModelBuildError):
        PwlApprox(1.0, 0.0, 4)


def _feeder(resistance: float) -> NetworkModel:
    buses = (Bus(1, (0.0,), 11.4, 13.3), Bus(2, (1.0,), 11.4, 13.3), Bus(3, (0.5,), 11.4, 13.3))
    lines = (Line(1, 2, resistance, 0.3, 600.0), Line(2, 3, resistance, 0.3, 600.0))
    return NetworkModel(buses, lines)


def _solve_feeder(network: NetworkModel):
    builder = MilpBuilder("feeder")
    supply = builder.add_column("supply", 0.0, 10.0, objective=1.0)
    injections = {
        1: BusInjection({supply: 1.0}),
        2: BusInjection(fixed=-1.0),
        3: BusInjection(fixed=-0.5)
    }
    flow = emit_flow_block(builder, network, injections, 0, 0, segments=6)
    model = builder.build("min")
    solution = solve_milp(model, SolveOptions(backend="highs"))
    assert solution.is_optimal
    return model, flow, solution.values, supply


def test_lossless_feeder_conserves_power():
    model, flow, x, supply = _solve_feeder(_feeder(0.0))
    names = [row.name for row in model.rows]
    assert not any(name.startswith("flowdiff_") for name in names)

    assert x[supply] == pytest.approx(1.5, abs=1e-7)
    assert x[flow.p_from[(0, 0, 0)]] == pytest.approx(1.5, abs=1e-7)
    assert x[flow.p_to[(0, 0, 0)]] == pytest.approx(-1.5, abs=1e-7)
    assert x[flow.p_from[(1, 0, 0)]] == pytest.approx(0.5, abs=1e-7)
    assert all(abs(x[col]) <= 1e-9 for col in flow.loss.values())


def test_resistive_feeder_balances_losses():
    network = _feeder(0.1)
    model, flow, x, supply = _solve_feeder(network)
    names = [row.name for row in model.rows]
    assert "flowdiff_l1_2_t1_s1" in names
    assert "flowdiff_l2_3_t1_s1" in names

    losses = sum(x[col] for col in flow.loss.values())
    assert x[supply] == pytest.approx(1.5 + losses, abs=1e-7)
    for k, line in enumerate(network.lines):
        key = (k, 0, 0)
        assert x[flow.loss[key]] == pytest.approx(line.resistance * x[flow.current_sq[key]], abs=1e-9)
        envelope = PwlApprox(-0.6, 0.6, 6).lower_envelope(x[flow.current[key]])
        assert x[flow.current_sq[key]] >= float(envelope) - 1e-7
        assert abs(x[flow.current[key]]) <= line.current_max / 1000.0 + 1e-9

    for bus in network.buses:
        key = (bus.bus_id, 0, 0)
        assert bus.v_min - 1e-9 <= x[flow.voltage[key]] <= bus.v_max + 1e-9


def test_flow_columns_are_recorded_per_key():
    network = _feeder(0.1)
    builder = MilpBuilder("feeder")
    flow = emit_flow_block(builder, network, {}, 1, 2)
    assert set(flow.voltage) == {(1, 1, 2), (2, 1, 2), (3, 1, 2)}
    assert set(flow.p_from) == {(0, 1, 2), (1, 1, 2)}
    assert len(flow.all_columns()) == 3 * 2 + 2 * 5
    assert builder.has_column("volt_b2_t2_s3")


def test_zero_impedance_line_is_rejected():
    buses = (Bus(1, (0.0,), 11.0, 13.0), Bus(2, (0.0,), 11.0, 13.0))
    network = NetworkModel(buses, (Line(1, 2, 0.0, 0.0, 400.0),))
    builder = MilpBuilder("bad")
    flow = FlowVarSet()
    emit_flow_block(builder, NetworkModel(buses, ()), {}, 0, 0, flow=flow)
    with pytest.raises(ModelBuildError):
        emit_line_rows(builder, network, 0, 0, 0, flow)
