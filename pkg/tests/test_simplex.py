"""
Tests for the embedded two-phase simplex
"""

import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from disco_scheduling_system.milp.model import MilpBuilder, OPTIMAL, INFEASIBLE, UNBOUNDED, verify_solution
from disco_scheduling_system.milp.simplex import solve_lp, audit_termination
from disco_scheduling_system.shared.exceptions import NumericalInstabilityError, StageError


def random_lp(rng, n=5, m=4):
    """Bounded LP with a known feasible point, mixed row senses and shifted bounds"""
    builder = MilpBuilder("random")
    x0 = rng.uniform(-1.0, 2.0, n)
    columns = []
    for j in range(n):
        lower = x0[j] - rng.uniform(0.0, 2.0)
        upper = x0[j] + rng.uniform(0.0, 2.0)
        columns.append(builder.add_column(f"x{j}", lower, upper, objective=rng.normal()))
    A = rng.normal(size=(m, n))
    margins = {"<=": 1.0, ">=": -1.0, "=": 0.0}
    for i in range(m):
        sense = ("<=", ">=", "=")[i % 3]
        rhs = float(A[i] @ x0) + margins[sense] * rng.uniform(0.1, 1.0)
        builder.add_row(f"r{i}", {columns[j]: A[i, j] for j in range(n)}, sense, rhs)
    return builder.build("min")


def reference_value(model):
    c = model.objective_vector()
    A = model.matrix().toarray()
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for k, row in enumerate(model.rows):
        if row.sense == "<=":
            A_ub.append(A[k])
            b_ub.append(row.rhs)
        elif row.sense == ">=":
            A_ub.append(-A[k])
            b_ub.append(-row.rhs)
        else:
            A_eq.append(A[k])
            b_eq.append(row.rhs)
    lower, upper = model.bounds()
    sign = -1.0 if model.sense == "max" else 1.0
    result = linprog(sign * c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                     A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                     bounds=list(zip(lower, upper)), method='highs')
    assert result.status == 0
    return sign * result.fun + model.objective_constant


@pytest.mark.parametrize("trial", range(100))
def test_matches_reference_solver(trial):
    model = random_lp(np.random.default_rng(trial), n=4 + trial % 3, m=3 + trial % 4)
    solution = solve_lp(model)
    assert solution.status == OPTIMAL
    assert solution.objective == pytest.approx(reference_value(model), abs=1e-7)
    worst_row, _ = verify_solution(model, solution.values, 1e-7)
    assert worst_row is None
    assert solution.stats['dual_objective'] == pytest.approx(solution.objective, abs=1e-7)


def test_maximization_with_constant():
    builder = MilpBuilder("max")
    x = builder.add_column("x", 0.0, 3.0, objective=3.0)
    y = builder.add_column("y", objective=2.0)
    builder.add_row("cap", {x: 1.0, y: 1.0}, "<=", 4.0)
    builder.add_row("mix", {x: 1.0, y: 3.0}, "<=", 6.0)
    builder.objective_constant = 5.0
    solution = solve_lp(builder.build("max"))
    assert solution.status == OPTIMAL
    assert solution.values == pytest.approx([3.0, 1.0])
    assert solution.objective == pytest.approx(16.0)


def test_free_columns():
    builder = MilpBuilder("free")
    x = builder.add_column("x", -np.inf, np.inf, objective=1.0)
    y = builder.add_column("y", -np.inf, np.inf, objective=1.0)
    builder.add_row("diff", {x: 1.0, y: -1.0}, "=", 1.0)
    builder.add_row("sum", {x: 1.0, y: 1.0}, ">=", 3.0)
    solution = solve_lp(builder.build("min"))
    assert solution.objective == pytest.approx(3.0)
    assert solution.values == pytest.approx([2.0, 1.0])


def test_degenerate_cycling_example():
    builder = MilpBuilder("cycling")
    x = [builder.add_column(f"x{j}", objective=c) for j, c in enumerate([-0.75, 20.0, -0.5, 6.0])]
    builder.add_row("r1", {x[0]: 0.25, x[1]: -8.0, x[2]: -1.0, x[3]: 9.0}, "<=", 0.0)
    builder.add_row("r2", {x[0]: 0.5, x[1]: -12.0, x[2]: -0.5, x[3]: 3.0}, "<=", 0.0)
    builder.add_row("r3", {x[2]: 1.0}, "<=", 1.0)
    solution = solve_lp(builder.build("min"))
    assert solution.status == OPTIMAL
    assert solution.objective == pytest.approx(-1.25)


def test_infeasible_and_unbounded():
    builder = MilpBuilder("infeasible")
    x = builder.add_column("x")
    builder.add_row("low", {x: 1.0}, "<=", 1.0)
    builder.add_row("high", {x: 1.0}, ">=", 2.0)
    assert solve_lp(builder.build("min")).status == INFEASIBLE

    builder = MilpBuilder("unbounded")
    x = builder.add_column("x", objective=-1.0)
    y = builder.add_column("y")
    builder.add_row("r", {x: 1.0, y: -1.0}, "<=", 1.0)
    solution = solve_lp(builder.build("min"))
    assert solution.status == UNBOUNDED
    assert not solution.has_values


def test_fixed_columns():
    builder = MilpBuilder("fixed")
    x = builder.add_column("x", 2.0, 2.0, objective=1.0)
    y = builder.add_column("y", 0.0, 5.0, objective=1.0)
    builder.add_row("need", {x: 1.0, y: 1.0}, ">=", 3.5)
    solution = solve_lp(builder.build("min"))
    assert solution.values == pytest.approx([2.0, 1.5])
    assert solution.objective == pytest.approx(3.5)


def vertex_value(model) -> float:
    """Best objective over every basic point: all equalities plus n - #eq active rows or bounds"""
    A = model.matrix().toarray()
    lower, upper = model.bounds()
    n = len(model.columns)
    unit = np.eye(n)
    equalities = [(A[k], row.rhs) for k, row in enumerate(model.rows) if row.sense == "="]
    candidates = [(A[k], row.rhs) for k, row in enumerate(model.rows) if row.sense != "="]
    candidates += [(unit[j], lower[j]) for j in range(n)] + [(unit[j], upper[j]) for j in range(n)]

    best = np.inf
    for chosen in itertools.combinations(candidates, n - len(equalities)):
        system = equalities + list(chosen)
        M = np.array([a for a, _ in system])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.array([b for _, b in system]))
        if np.any(x < lower - 1e-9) or np.any(x > upper + 1e-9):
            continue
        activity = A @ x
        feasible = all(activity[k] <= row.rhs + 1e-9 if row.sense == "<=" else
                       activity[k] >= row.rhs - 1e-9 if row.sense == ">=" else
                       abs(activity[k] - row.rhs) <= 1e-9
                       for k, row in enumerate(model.rows))
        if feasible:
            best = min(best, model.objective_value(x))
    return best


@pytest.mark.parametrize("trial", range(100))
def test_matches_vertex_enumeration(trial):
    model = random_lp(np.random.default_rng(1000 + trial), n=3 + trial % 2, m=2 + trial % 2)
    solution = solve_lp(model)
    assert solution.status == OPTIMAL
    assert solution.objective == pytest.approx(vertex_value(model), abs=1e-8)


def test_termination_audit():
    assert audit_termination(2.0, 2.0, np.zeros(3), 0) == []
    assert audit_termination(2.0, 2.0, np.zeros(3), 4) == ["numerical instability: 4 pivots below 1e-10"]
    gap = audit_termination(2.0, 2.5, np.zeros(3), 0)
    assert len(gap) == 1 and gap[0].startswith("duality gap")

    with pytest.raises(NumericalInstabilityError, match="dual infeasibility") as err:
        audit_termination(2.0, 2.0, np.array([0.0, -1e-3]), 1)
    assert err.value.exit_code == 2
    assert StageError("solver", err.value).exit_code == 2
    with pytest.raises(NumericalInstabilityError, match="duality gap"):
        audit_termination(2.0, 2.5, np.zeros(3), 3)
