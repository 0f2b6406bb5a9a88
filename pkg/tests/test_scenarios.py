"""
Tests for distribution discretization and scenario sets
"""

import math
import os

import numpy as np
import pytest
from scipy import stats

from disco_scheduling_system.scenarios.engine import (
    PdfSpec, Branch, ScenarioSet, discretize, load_branches, pv_branches, build_tree, load_scenario_file,
    build_scenarios
)
from disco_scheduling_system.shared.exceptions import ScenarioError
from disco_scheduling_system.shared.models import CaseConfig


def test_normal_split_probabilities_and_means():
    branches = load_branches(0.1, 3, 2)
    probabilities = [b.probability for b in branches]
    assert probabilities[0] == pytest.approx(stats.norm.cdf(-1.0))
    assert probabilities[1] == pytest.approx(stats.norm.cdf(1.0) - stats.norm.cdf(-1.0))
    assert math.fsum(probabilities) == pytest.approx(1.0, abs=1e-12)

    low, mid, high = (b.value[0] for b in branches)
    assert mid == pytest.approx(1.0)
    assert 1.0 - low == pytest.approx(high - 1.0)
    # Conditional mean of the upper tail: mu + sigma * phi(1) / (1 - Phi(1))
    assert high == pytest.approx(1.0 + 0.1 * stats.norm.pdf(1.0) / stats.norm.sf(1.0))


def test_two_interval_split_cuts_at_the_mean():
    branches = discretize(PdfSpec("normal", (2.0,), (0.5,)), 2)
    assert [b.probability for b in branches] == pytest.approx([0.5, 0.5])
    assert branches[0].value[0] < 2.0 < branches[1].value[0]


def test_custom_boundaries_must_increase():
    with pytest.raises(ScenarioError):
        discretize(PdfSpec("normal", (1.0,), (0.1,), boundaries=(0.5, -0.5)), 3)


@pytest.mark.parametrize("family", ["beta", "truncnorm"])
def test_pv_multipliers_have_unit_expectation(family):
    pdf = PdfSpec("irradiance", (0.6, 0.4), (0.15, 0.1), family)
    branches = pv_branches(pdf, 3)
    for t in range(2):
        expectation = sum(b.probability * b.value[t] for b in branches)
        assert expectation == pytest.approx(1.0, abs=1e-6)
        assert branches[0].value[t] < branches[1].value[t] < branches[2].value[t]


def test_invalid_distributions():
    with pytest.raises(ScenarioError):
        load_branches(-0.1, 3, 1)
    with pytest.raises(ScenarioError):
        pv_branches(PdfSpec("irradiance", (0.5,), (0.6,), "beta"), 3)
    with pytest.raises(ScenarioError):
        discretize(PdfSpec("uniform", (0.5,), (0.1,)), 3)


def test_generative_tree_is_load_major():
    scenarios = build_scenarios(CaseConfig(horizon=3))
    assert len(scenarios) == 9
    assert math.fsum(scenarios.probabilities) == pytest.approx(1.0, abs=1e-9)
    # First three scenarios share the low load branch
    assert scenarios[0].load_multiplier == scenarios[2].load_multiplier
    assert scenarios[0].load_multiplier[0] < scenarios[3].load_multiplier[0]
    assert scenarios[0].pv_multiplier == scenarios[3].pv_multiplier


def test_probability_override_must_sum_to_one():
    load = [Branch((0.9,), 0.5), Branch((1.1,), 0.5)]
    pv = [Branch((1.0,), 1.0)]
    with pytest.raises(ScenarioError):
        build_tree(load, pv, probabilities=[0.3, 0.3])
    scenarios = build_tree(load, pv, probabilities=[0.3, 0.3], normalize=True)
    assert scenarios.probabilities == pytest.approx([0.5, 0.5])


def test_bundled_probabilities_normalize(case_dir):
    path = os.path.join(case_dir, "scenarios.csv")
    with pytest.raises(ScenarioError):
        load_scenario_file(path, 24)

    scenarios = load_scenario_file(path, 24, normalize=True)
    assert len(scenarios) == 9
    assert math.fsum(scenarios.probabilities) == pytest.approx(1.0, abs=1e-12)
    assert scenarios.probabilities[5] == pytest.approx(0.42 / 0.91)
    assert scenarios.modal_index() == 5
    assert scenarios[5].pv_multiplier == (1.3,) * 24


def test_hourly_scenario_file(tmp_path):
    path = tmp_path / "scenarios.csv"
    path.write_text("scenario_id,hour,probability,load_multiplier,pv_multiplier\n"
                    "1,1,0.4,0.9,1.0\n1,2,0.4,0.95,1.1\n2,1,0.6,1.1,0.8\n2,2,0.6,1.05,0.7\n")
    scenarios = load_scenario_file(str(path), 2)
    assert scenarios[0].load_multiplier == (0.9, 0.95)
    assert scenarios[1].pv_multiplier == (0.8, 0.7)

    with pytest.raises(ScenarioError):
        load_scenario_file(str(path), 3)


def test_scenario_set_rejects_bad_probabilities():
    with pytest.raises(ScenarioError):
        ScenarioSet(())
    single = ScenarioSet.single(4)
    assert len(single) == 1
    assert single.horizon == 4
    frame = single.to_frame()
    assert list(frame.columns) == ['scenario_id', 'hour', 'probability', 'load_multiplier', 'pv_multiplier']
    assert len(frame) == 4
    assert np.allclose(frame['probability'], 1.0)
