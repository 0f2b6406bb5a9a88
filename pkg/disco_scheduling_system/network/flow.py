"""
Linearized active-power flow block for one (hour, scenario) pair

Units are kV, kA, ohm and MW, which keeps every row dimensionally consistent
(kV^2 / ohm = MW, ohm * kA^2 = MW). The squares of voltage and current are
separate columns held between tangent cuts and a global secant of x^2.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..milp.model import MilpBuilder, INF
from ..shared.exceptions import ModelBuildError, DatasetValidationError
from ..shared.models import Bus, Line, NetworkModel

logger = logging.getLogger("stage.compiler")

AMPERE_PER_KA = 1000.0

Key = Tuple[int, int, int]  # (line index or bus id, t, s)


class PwlApprox:
    """Piecewise-linear approximation of x^2 on [lower, upper] with K equal segments"""

    def __init__(self, lower: float, upper: float, segments: int):
        if segments < 1:
            raise ModelBuildError("piecewise approximation needs at least one segment")
        if lower > upper:
            raise ModelBuildError(f"empty interval [{lower}, {upper}]")
        self.lower = float(lower)
        self.upper = float(upper)
        self.segments = int(segments)
        self.breakpoints = np.linspace(self.lower, self.upper, self.segments + 1)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def slopes(self) -> np.ndarray:
        """Chord slopes, strictly increasing on a non-degenerate interval"""
        return self.breakpoints[:-1] + self.breakpoints[1:]

    def evaluate(self, x):
        """Chord interpolation; over-estimates x^2 and is exact at breakpoints"""
        return np.interp(x, self.breakpoints, self.breakpoints ** 2)

    def tangent_cuts(self) -> List[Tuple[float, float]]:
        """(slope, intercept) of the tangents at every breakpoint: y >= slope * x + intercept"""
        return [(2.0 * a, -a * a) for a in self.breakpoints]

    def lower_envelope(self, x):
        x = np.asarray(x, dtype=float)
        return np.max([s * x + c for s, c in self.tangent_cuts()], axis=0)

    def secant(self) -> Tuple[float, float]:
        """Chord over the whole interval: y <= slope * x + intercept"""
        return self.lower + self.upper, -self.lower * self.upper

    def max_error(self) -> float:
        return (self.width / self.segments) ** 2 / 4.0


@dataclass
class BusInjection:
    """Net injection at a bus: decision columns plus a fixed MW term"""
    terms: Dict[int, float] = field(default_factory=dict)
    fixed: float = 0.0

    def add(self, column: int, coefficient: float):
        self.terms[column] = self.terms.get(column, 0.0) + coefficient


@dataclass
class FlowVarSet:
    """Column indices of every flow quantity, keyed by (line index | bus id, t, s)"""
    p_from: Dict[Key, int] = field(default_factory=dict)
    p_to: Dict[Key, int] = field(default_factory=dict)
    current: Dict[Key, int] = field(default_factory=dict)
    current_sq: Dict[Key, int] = field(default_factory=dict)
    loss: Dict[Key, int] = field(default_factory=dict)
    voltage: Dict[Key, int] = field(default_factory=dict)
    voltage_sq: Dict[Key, int] = field(default_factory=dict)

    def families(self) -> Dict[str, Dict[Key, int]]:
        return {
            'p_from': self.p_from, 'p_to': self.p_to, 'current': self.current,
            'current_sq': self.current_sq, 'loss': self.loss,
            'voltage': self.voltage, 'voltage_sq': self.voltage_sq
        }

    def all_columns(self) -> List[int]:
        return [col for family in self.families().values() for col in family.values()]


def _suffix(t: int, s: int) -> str:
    return f"t{t + 1}_s{s + 1}"


def _line_tag(line: Line) -> str:
    return f"l{line.from_bus}_{line.to_bus}"


def _emit_sandwich(builder: MilpBuilder, tag: str, x: int, x_sq: int, pwl: PwlApprox):
    for k, (slope, intercept) in enumerate(pwl.tangent_cuts()):
        builder.add_row(f"cut{k}_{tag}", {x_sq: 1.0, x: -slope} if slope else {x_sq: 1.0}, ">=", intercept)
    slope, intercept = pwl.secant()
    builder.add_row(f"sec_{tag}", {x_sq: 1.0, x: -slope} if slope else {x_sq: 1.0}, "<=", intercept)


def emit_voltage_bounds(builder: MilpBuilder, bus: Bus, t: int, s: int, flow: FlowVarSet,
                        pwl: Optional[PwlApprox] = None, segments: int = 6):
    """Voltage window as column bounds, squared-voltage window and its sandwich"""
    if bus.v_min > bus.v_max:
        raise DatasetValidationError(f"bus {bus.bus_id}", f"v_min {bus.v_min} above v_max {bus.v_max}")
    pwl = pwl or PwlApprox(bus.v_min, bus.v_max, segments)
    tag = f"b{bus.bus_id}_{_suffix(t, s)}"
    key = (bus.bus_id, t, s)
    v = builder.add_column(f"volt_{tag}", bus.v_min, bus.v_max)
    v_sq = builder.add_column(f"voltsq_{tag}", bus.v_min ** 2, bus.v_max ** 2)
    flow.voltage[key] = v
    flow.voltage_sq[key] = v_sq
    _emit_sandwich(builder, f"V_{tag}", v, v_sq, pwl)


def emit_line_rows(builder: MilpBuilder, network: NetworkModel, k: int, t: int, s: int,
                   flow: FlowVarSet, pwl: Optional[PwlApprox] = None, segments: int = 6):
    """Loss, voltage-difference, current and current-limit rows of one line"""
    line = network.lines[k]
    if line.impedance <= 0.0:
        raise ModelBuildError(f"line {line.name} has zero impedance")
    i_max = line.current_max / AMPERE_PER_KA
    pwl = pwl or PwlApprox(-i_max, i_max, segments)
    tag = f"{_line_tag(line)}_{_suffix(t, s)}"
    key = (k, t, s)

    p_from = builder.add_column(f"pfm_{tag}", -INF, INF)
    p_to = builder.add_column(f"pto_{tag}", -INF, INF)
    current = builder.add_column(f"cur_{tag}", -i_max, i_max)
    current_sq = builder.add_column(f"cursq_{tag}", 0.0, i_max ** 2)
    loss = builder.add_column(f"loss_{tag}", 0.0, INF)
    flow.p_from[key], flow.p_to[key] = p_from, p_to
    flow.current[key], flow.current_sq[key], flow.loss[key] = current, current_sq, loss

    sending = flow.voltage_sq[(line.from_bus, t, s)]
    receiving = flow.voltage_sq[(line.to_bus, t, s)]
    r, z = line.resistance, line.impedance

    builder.add_row(f"flowloss_{tag}", {p_from: 1.0, p_to: 1.0, loss: -1.0}, "=", 0.0)
    builder.add_row(f"lossdef_{tag}", {loss: 1.0, current_sq: -r}, "=", 0.0)
    # Without resistance the voltage-difference row would pin the flow at zero
    if r > 0.0:
        g = r / (z * z)
        builder.add_row(f"flowdiff_{tag}", {p_from: 1.0, p_to: -1.0, sending: -g, receiving: g}, "=", 0.0)
    builder.add_row(f"ohm_{tag}", {current: 1.0,
                                   flow.voltage[(line.from_bus, t, s)]: -1.0 / z,
                                   flow.voltage[(line.to_bus, t, s)]: 1.0 / z}, "=", 0.0)
    _emit_sandwich(builder, f"I_{tag}", current, current_sq, pwl)


def emit_bus_balance(builder: MilpBuilder, network: NetworkModel, bus_id: int, t: int, s: int,
                     flow: FlowVarSet, injection: Optional[BusInjection] = None) -> int:
    """Injections minus load equal the power sent into incident lines"""
    injection = injection or BusInjection()
    coefficients: Dict[int, float] = dict(injection.terms)
    for k in network.lines_from(bus_id):
        col = flow.p_from[(k, t, s)]
        coefficients[col] = coefficients.get(col, 0.0) - 1.0
    for k in network.lines_to(bus_id):
        col = flow.p_to[(k, t, s)]
        coefficients[col] = coefficients.get(col, 0.0) - 1.0
    return builder.add_row(f"bal_b{bus_id}_{_suffix(t, s)}", coefficients, "=", -injection.fixed)


def emit_flow_block(builder: MilpBuilder, network: NetworkModel, injections: Dict[int, BusInjection],
                    t: int, s: int, segments: int = 6, flow: Optional[FlowVarSet] = None) -> FlowVarSet:
    """All flow columns and rows of one (t, s) pair: buses, then lines, then balances"""
    flow = flow if flow is not None else FlowVarSet()
    for bus in network.buses:
        emit_voltage_bounds(builder, bus, t, s, flow, segments=segments)
    for k in range(len(network.lines)):
        emit_line_rows(builder, network, k, t, s, flow, segments=segments)
    for bus in network.buses:
        emit_bus_balance(builder, network, bus.bus_id, t, s, flow, injections.get(bus.bus_id))
    return flow
