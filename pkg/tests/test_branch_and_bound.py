"""
Tests for branch and bound over binaries and the HiGHS backend
"""

import itertools

import numpy as np
import pytest

from disco_scheduling_system.milp.branch_and_bound import solve_milp, SolveOptions
from disco_scheduling_system.milp.model import MilpBuilder, MilpModel, Column, OPTIMAL, INFEASIBLE, LIMIT
from disco_scheduling_system.shared.exceptions import ModelBuildError


def knapsack(values, weights, capacity):
    builder = MilpBuilder("knapsack")
    items = [builder.add_binary(f"take{k}") for k in range(len(values))]
    for k, value in zip(items, values):
        builder.add_objective(k, value)
    builder.add_row("capacity", dict(zip(items, weights)), "<=", capacity)
    return builder.build("max")


def test_knapsack_with_fractional_relaxation():
    model = knapsack([10.0, 7.0, 5.0, 3.0], [5.0, 4.0, 3.0, 2.0], 8.0)
    solution = solve_milp(model)
    assert solution.status == OPTIMAL
    assert solution.objective == pytest.approx(15.0)
    assert solution.values == pytest.approx([1.0, 0.0, 1.0, 0.0])
    assert solution.stats['nodes'] > 1


def test_three_item_knapsack():
    solution = solve_milp(knapsack([3.0, 4.0, 5.0], [2.0, 3.0, 4.0], 5.0))
    assert solution.status == OPTIMAL
    assert solution.objective == pytest.approx(7.0)
    assert solution.values == pytest.approx([1.0, 1.0, 0.0])


@pytest.mark.parametrize("seed", range(50))
def test_matches_subset_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, m = 6 + seed % 7, 3
    values = rng.uniform(1.0, 10.0, n)
    weights = rng.uniform(0.5, 5.0, (m, n))
    capacity = weights.sum(axis=1) * 0.4

    builder = MilpBuilder("multi")
    items = [builder.add_binary(f"b{k}") for k in range(n)]
    for k, value in zip(items, values):
        builder.add_objective(k, value)
    for i in range(m):
        builder.add_row(f"cap{i}", dict(zip(items, weights[i])), "<=", capacity[i])
    model = builder.build("max")

    best = max(float(values @ np.array(choice))
               for choice in itertools.product((0.0, 1.0), repeat=n)
               if np.all(weights @ np.array(choice) <= capacity + 1e-12))
    solution = solve_milp(model)
    assert solution.status == OPTIMAL
    assert solution.objective == pytest.approx(best, rel=1e-5)
    assert solve_milp(model, SolveOptions(backend="highs")).objective == pytest.approx(best, rel=1e-5)


def test_mixed_binary_continuous():
    # Fixed charge: opening costs 4, production earns 3 per unit up to 2 units
    builder = MilpBuilder("fixed_charge")
    y = builder.add_column("y", 0.0, 5.0, objective=3.0)
    u = builder.add_binary("open")
    builder.add_objective(u, -4.0)
    builder.add_row("link", {y: 1.0, u: -2.0}, "<=", 0.0)
    solution = solve_milp(builder.build("max"))
    assert solution.objective == pytest.approx(2.0)
    assert solution.values == pytest.approx([2.0, 1.0])


def test_infeasible_and_limit():
    builder = MilpBuilder("odd")
    a, b = builder.add_binary("a"), builder.add_binary("b")
    builder.add_row("half", {a: 2.0, b: 2.0}, "=", 1.0)
    assert solve_milp(builder.build("max")).status == INFEASIBLE

    model = knapsack([10.0, 7.0, 5.0, 3.0], [5.0, 4.0, 3.0, 2.0], 8.0)
    limited = solve_milp(model, SolveOptions(node_limit=1))
    assert limited.status == LIMIT
    assert not limited.has_values


def test_general_integers_are_rejected():
    general = MilpModel("general", "max", (Column("n", 0.0, 3.0, 1.0, True),), (), ())
    with pytest.raises(ModelBuildError):
        solve_milp(general)
    with pytest.raises(ModelBuildError):
        MilpBuilder("general").add_column("m", 0.0, 3.0, integer=True)
