"""
Scenario engine: discretized load and PV distributions combined into a tree

Load uncertainty is a normal multiplier around the forecast; PV uncertainty is
a clearness-index distribution (moment-matched beta, or a normal truncated at
zero) turned into a multiplier with expectation one. Scenarios are ordered
load-major: scenario s = i * n_pv + j pairs load branch i with PV branch j.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..data.loader import read_table
from ..shared.exceptions import ScenarioError, DatasetError
from ..shared.models import CaseConfig

logger = logging.getLogger("stage.scenarios")

PROBABILITY_TOL = 1e-9
PDF_KINDS = ("normal", "irradiance")


@dataclass(frozen=True)
class PdfSpec:
    """Hourly distribution of a multiplier (normal) or of a clearness index (irradiance)"""
    kind: str
    location: Tuple[float, ...]
    scale: Tuple[float, ...]
    family: str = "normal"  # normal | beta | truncnorm
    boundaries: Optional[Tuple[float, ...]] = None  # standardized cut points, normal only

    @property
    def horizon(self) -> int:
        return len(self.location)


@dataclass(frozen=True)
class Branch:
    value: Tuple[float, ...]  # per hour
    probability: float


@dataclass(frozen=True)
class Scenario:
    index: int
    probability: float
    load_multiplier: Tuple[float, ...]
    pv_multiplier: Tuple[float, ...]


@dataclass(frozen=True)
class ScenarioSet:
    """Second-stage scenarios with probabilities summing to one"""
    scenarios: Tuple[Scenario, ...]

    def __post_init__(self):
        if not self.scenarios:
            raise ScenarioError("a scenario set needs at least one scenario")
        horizon = len(self.scenarios[0].load_multiplier)
        for s in self.scenarios:
            if s.probability <= 0.0:
                raise ScenarioError(f"scenario {s.index + 1} has non-positive probability {s.probability}")
            if len(s.load_multiplier) != horizon or len(s.pv_multiplier) != horizon:
                raise ScenarioError(f"scenario {s.index + 1} multipliers do not cover {horizon} hours")
            if min(s.load_multiplier) < 0.0 or min(s.pv_multiplier) < 0.0:
                raise ScenarioError(f"scenario {s.index + 1} has a negative multiplier")
        total = math.fsum(s.probability for s in self.scenarios)
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise ScenarioError(f"scenario probabilities sum to {total:.12g}, expected 1")

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __getitem__(self, index: int) -> Scenario:
        return self.scenarios[index]

    @property
    def horizon(self) -> int:
        return len(self.scenarios[0].load_multiplier)

    @property
    def probabilities(self) -> List[float]:
        return [s.probability for s in self.scenarios]

    def modal_index(self) -> int:
        """Most probable scenario, lowest index on ties"""
        probabilities = self.probabilities
        return probabilities.index(max(probabilities))

    @classmethod
    def single(cls, horizon: int) -> 'ScenarioSet':
        return cls((Scenario(0, 1.0, (1.0,) * horizon, (1.0,) * horizon),))

    def to_frame(self) -> pd.DataFrame:
        records = []
        for s in self.scenarios:
            for t in range(self.horizon):
                records.append({
                    'scenario_id': s.index + 1,
                    'hour': t + 1,
                    'probability': s.probability,
                    'load_multiplier': s.load_multiplier[t],
                    'pv_multiplier': s.pv_multiplier[t]
                })
        return pd.DataFrame.from_records(
            records, columns=['scenario_id', 'hour', 'probability', 'load_multiplier', 'pv_multiplier'])

    def dump_csv(self, path: str) -> str:
        self.to_frame().to_csv(path, index=False, float_format='%.12g')
        return path

    def to_dict(self) -> Dict[str, Any]:
        return {'scenarios': [
            {'index': s.index, 'probability': s.probability,
             'load_multiplier': list(s.load_multiplier), 'pv_multiplier': list(s.pv_multiplier)}
            for s in self.scenarios
        ]}


def _check_pdf(pdf: PdfSpec):
    if pdf.kind not in PDF_KINDS:
        raise ScenarioError(f"unknown distribution kind '{pdf.kind}'")
    if len(pdf.scale) != len(pdf.location) or not pdf.location:
        raise ScenarioError("location and scale must give one value per hour")
    if min(pdf.scale) <= 0.0:
        raise ScenarioError(f"distribution scale must be positive, got {min(pdf.scale)}")


def _irradiance_dist(mean: float, std: float, family: str):
    if family == "beta":
        if not 0.0 < mean < 1.0:
            raise ScenarioError(f"beta clearness mean must lie in (0, 1), got {mean}")
        variance = std * std
        if variance >= mean * (1.0 - mean):
            raise ScenarioError(f"clearness std {std} too large for mean {mean}")
        common = mean * (1.0 - mean) / variance - 1.0
        return stats.beta(mean * common, (1.0 - mean) * common)
    if family in ("truncnorm", "normal"):
        return stats.truncnorm((0.0 - mean) / std, np.inf, loc=mean, scale=std)
    raise ScenarioError(f"unknown irradiance family '{family}'")


def _normal_cuts(pdf: PdfSpec, intervals: int) -> np.ndarray:
    if pdf.boundaries is not None:
        cuts = np.asarray(pdf.boundaries, dtype=float)
        if len(cuts) != intervals - 1 or np.any(np.diff(cuts) <= 0.0):
            raise ScenarioError(f"{intervals} intervals need {intervals - 1} increasing boundaries")
        return cuts
    if intervals == 2:
        return np.array([0.0])
    return np.linspace(-1.0, 1.0, intervals - 1)


def discretize(pdf: PdfSpec, intervals: int) -> List[Branch]:
    """Split a distribution into intervals represented by their conditional means"""
    if intervals < 1:
        raise ScenarioError("at least one interval is needed")
    _check_pdf(pdf)
    horizon = pdf.horizon

    if pdf.kind == "normal":
        if intervals == 1:
            return [Branch(tuple(float(v) for v in pdf.location), 1.0)]
        edges = np.concatenate([[-np.inf], _normal_cuts(pdf, intervals), [np.inf]])
        probabilities = np.diff(stats.norm.cdf(edges))
        branches = []
        for k in range(intervals):
            a, b = edges[k], edges[k + 1]
            value = tuple(float(stats.truncnorm.mean(a, b, loc=mu, scale=sigma))
                          for mu, sigma in zip(pdf.location, pdf.scale))
            branches.append(Branch(value, float(probabilities[k])))
        return branches

    dists = [_irradiance_dist(m, s, pdf.family) for m, s in zip(pdf.location, pdf.scale)]
    if intervals == 1:
        return [Branch(tuple(float(d.mean()) for d in dists), 1.0)]
    branches = []
    for k in range(intervals):
        values = []
        for d in dists:
            lo, hi = d.ppf(k / intervals), d.ppf((k + 1) / intervals)
            values.append(max(0.0, float(d.expect(lambda x: x, lb=lo, ub=hi, conditional=True))))
        branches.append(Branch(tuple(values), 1.0 / intervals))
    return branches


def load_branches(sigma: float, intervals: int, horizon: int) -> List[Branch]:
    """Normal load multiplier around the forecast"""
    return discretize(PdfSpec("normal", (1.0,) * horizon, (sigma,) * horizon), intervals)


def pv_branches(pdf: PdfSpec, intervals: int) -> List[Branch]:
    """Irradiance branches rescaled to multipliers with expectation one"""
    if pdf.kind != "irradiance":
        raise ScenarioError("PV branches need an irradiance distribution")
    _check_pdf(pdf)
    means = [float(_irradiance_dist(m, s, pdf.family).mean()) for m, s in zip(pdf.location, pdf.scale)]
    return [Branch(tuple(v / mean for v, mean in zip(branch.value, means)), branch.probability)
            for branch in discretize(pdf, intervals)]


def _finalize(probabilities: Sequence[float], normalize: bool) -> List[float]:
    probabilities = [float(p) for p in probabilities]
    if min(probabilities) <= 0.0:
        raise ScenarioError("scenario probabilities must be positive")
    total = math.fsum(probabilities)
    if abs(total - 1.0) > PROBABILITY_TOL:
        if not normalize:
            raise ScenarioError(f"scenario probabilities sum to {total:.12g}, expected 1")
        logger.warning(f"Scenario probabilities sum to {total:.6g}; rescaling to 1")
        probabilities = [p / total for p in probabilities]
    return probabilities


def build_tree(load: Sequence[Branch], pv: Sequence[Branch],
               probabilities: Optional[Sequence[float]] = None, normalize: bool = False) -> ScenarioSet:
    """Cartesian product of load and PV branches in load-major order"""
    if not load or not pv:
        raise ScenarioError("both branch lists must be non-empty")
    pairs = [(lb, pb) for lb in load for pb in pv]
    if probabilities is None:
        probabilities = [lb.probability * pb.probability for lb, pb in pairs]
    elif len(probabilities) != len(pairs):
        raise ScenarioError(f"{len(probabilities)} probabilities given for {len(pairs)} scenarios")
    probabilities = _finalize(probabilities, normalize)

    scenarios = tuple(
        Scenario(s, p, lb.value, pb.value) for s, ((lb, pb), p) in enumerate(zip(pairs, probabilities))
    )
    logger.info(f"Built scenario tree: {len(load)} load x {len(pv)} PV branches")
    return ScenarioSet(scenarios)


def load_scenario_file(path: str, horizon: int, normalize: bool = False) -> ScenarioSet:
    """Scenario override file: scenario_id, probability, load/pv multipliers, optional hour"""
    try:
        table = read_table(path, ['scenario_id', 'probability', 'load_multiplier', 'pv_multiplier'])
        ids = [int(v) for v in table.numeric('scenario_id')]
        probability = table.numeric('probability')
        load = table.numeric('load_multiplier')
        pv = table.numeric('pv_multiplier')
        hours = [int(v) for v in table.numeric('hour')] if table.has('hour') else None
    except DatasetError as e:
        raise ScenarioError(str(e))

    order: List[int] = []
    rows: Dict[int, List[int]] = {}
    for r, sid in enumerate(ids):
        if sid not in rows:
            order.append(sid)
            rows[sid] = []
        rows[sid].append(r)

    probabilities, load_mult, pv_mult = [], [], []
    for sid in order:
        members = rows[sid]
        if len({probability[r] for r in members}) != 1:
            raise ScenarioError(f"{path}: scenario {sid} has inconsistent probabilities")
        probabilities.append(float(probability[members[0]]))
        if hours is None:
            if len(members) != 1:
                raise ScenarioError(f"{path}: scenario {sid} repeated without an hour column")
            load_mult.append((float(load[members[0]]),) * horizon)
            pv_mult.append((float(pv[members[0]]),) * horizon)
        else:
            by_hour = {hours[r]: r for r in members}
            if sorted(by_hour) != list(range(1, horizon + 1)):
                raise ScenarioError(f"{path}: scenario {sid} must list hours 1..{horizon}")
            load_mult.append(tuple(float(load[by_hour[t]]) for t in range(1, horizon + 1)))
            pv_mult.append(tuple(float(pv[by_hour[t]]) for t in range(1, horizon + 1)))

    probabilities = _finalize(probabilities, normalize)
    logger.info(f"Loaded {len(order)} scenarios from {path}")
    return ScenarioSet(tuple(Scenario(k, p, l, v) for k, (p, l, v)
                             in enumerate(zip(probabilities, load_mult, pv_mult))))


def build_scenarios(config: CaseConfig, horizon: Optional[int] = None, intervals: int = 3) -> ScenarioSet:
    """Scenario set selected by the case configuration"""
    horizon = horizon or config.horizon
    if config.scenario_mode == "single":
        return ScenarioSet.single(horizon)
    if config.scenario_mode == "file":
        if not config.scenario_file:
            raise ScenarioError("scenario_mode 'file' needs scenario_file")
        return load_scenario_file(config.scenario_file, horizon, config.normalize_probabilities)
    if config.scenario_mode != "generative":
        raise ScenarioError(f"unknown scenario mode '{config.scenario_mode}'")

    irradiance = PdfSpec("irradiance", (config.pv_mean_clearness,) * horizon, (config.pv_std,) * horizon,
                         config.pv_family)
    return build_tree(load_branches(config.load_sigma, intervals, horizon), pv_branches(irradiance, intervals))
