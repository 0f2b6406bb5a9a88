"""
Tests for the single-level reformulation of the Disco/microgrid game
"""

from typing import Tuple

import numpy as np
import pytest
from scipy.optimize import linprog

from disco_scheduling_system.bilevel.compiler import (assemble_milp, compile_lower_level_milp, extract_solution,
                                                      check_big_m)
from disco_scheduling_system.bilevel.kkt import ComplementarityEncoding
from disco_scheduling_system.bilevel.lower_level import build_ll_lp
from disco_scheduling_system.data.synthetic import random_microgrid, random_prices, two_bus_case, random_case
from disco_scheduling_system.milp.branch_and_bound import solve_milp, SolveOptions
from disco_scheduling_system.milp.model import verify_solution
from disco_scheduling_system.scenarios.engine import ScenarioSet
from disco_scheduling_system.shared.exceptions import IndexSetMismatchError
from tests.conftest import make_microgrid

HIGHS = SolveOptions(backend="highs")


@pytest.mark.parametrize("seed", range(100))
def test_kkt_milp_reproduces_the_lp_optimum(seed):
    rng = np.random.default_rng(seed)
    mg = random_microgrid(rng, "MG1", 2, 3)
    prices = random_prices(rng, 3)
    lp = build_ll_lp(mg)

    model, block = compile_lower_level_milp(lp, prices)
    solution = solve_milp(model, HIGHS)
    optimum, _ = lp.solve(prices)
    assert solution.objective == pytest.approx(optimum, rel=1e-5, abs=1e-4)

    primal, lam, mu = block.values(solution.values)
    eq, ineq = lp.residuals(primal)
    assert eq <= 1e-6 and ineq <= 1e-6
    assert np.all(mu >= -1e-9)
    payment = float(np.dot(prices, primal[lp.price_columns]))
    assert block.revenue(solution.values) == pytest.approx(payment, abs=1e-3)


def test_embedded_branch_and_bound_agrees_with_highs():
    lp = build_ll_lp(make_microgrid(horizon=1, demand=[1.0], pv=[0.2]))
    model, _ = compile_lower_level_milp(lp, [40.0])
    embedded = solve_milp(model)
    assert embedded.objective == pytest.approx(solve_milp(model, HIGHS).objective, abs=1e-5)
    assert embedded.objective == pytest.approx(0.6 * 38.0 + 0.2 * 40.0, abs=1e-5)


def test_model_layout(microgrid):
    network, microgrids, market, config = two_bus_case(load=[1.0, 0.8], microgrid=microgrid, flexibility=True)
    compiled = assemble_milp(network, microgrids, ScenarioSet.single(2), market, config)
    names = [col.name for col in compiled.model.columns]

    assert names[:6] == ["pe_t1", "lem_t1", "df_t1", "pe_t2", "lem_t2", "df_t2"]
    assert names[6] == "MG1_pmg_t1"
    assert compiled.model.sense == "max"
    assert compiled.model.num_binaries == 2 * 14
    assert compiled.model.columns[2].upper == 0.0
    rows = {row.name for row in compiled.model.rows}
    assert "flexup_t2" in rows and "mgflexdn_t2" in rows
    assert "flexup_t1" not in rows
    assert "MG1_stat_pmg_t1" in rows and "MG1_cd_xup_t2" in rows
    assert not any(name.startswith("flowdiff_") for name in rows)
    assert compiled.model.objective_constant == pytest.approx(36.0 * 1.0 + 48.0 * 0.8)


def _hour_margin(need: float, wem: float, prices) -> Tuple[float, float]:
    """Best Disco margin on the microgrid exchange and its price, optimistic on lower-level ties"""
    bounds = [(-2.0, 2.0), (0.0, 0.6), (0.0, 0.2)]
    best, best_rho = -np.inf, None
    for rho in prices:
        cost = [rho, 38.0, 45.5]
        follower = linprog(cost, A_eq=[[1.0, 1.0, 1.0]], b_eq=[need], bounds=bounds, method='highs')
        leader = linprog([-(rho - wem), 0.0, 0.0], A_ub=[cost], b_ub=[follower.fun + 1e-7],
                         A_eq=[[1.0, 1.0, 1.0]], b_eq=[need], bounds=bounds, method='highs')
        if -leader.fun > best:
            best, best_rho = -leader.fun, rho
    return best, best_rho


def _refined_margin(need: float, wem: float, coarse: Tuple[float, float], cap: float = 90.0) -> float:
    """Re-enumerate on a 0.001 grid within one coarse step of the coarse optimum"""
    _, rho = coarse
    fine = np.clip(np.round(rho + np.arange(-100, 101) / 1000.0, 3), 0.0, cap)
    return max(coarse[0], _hour_margin(need, wem, np.unique(fine))[0])


def test_two_bus_equilibrium_matches_price_enumeration():
    microgrid = make_microgrid(demand=[1.0, 1.0], pv=[0.2, 0.0])
    network, microgrids, market, config = two_bus_case(load=[1.0, 0.8], microgrid=microgrid)
    compiled = assemble_milp(network, microgrids, ScenarioSet.single(2), market, config)
    solution = solve_milp(compiled.model, HIGHS)
    assert solution.is_optimal

    grid = np.arange(0, 901) / 10.0
    base = (36.0 - 30.0) * 1.0 + (48.0 - 40.0) * 0.8
    first, second = _hour_margin(0.8, 30.0, grid), _hour_margin(1.0, 40.0, grid)
    coarse = base + first[0] + second[0]
    # exchange is at most 2 MW per hour, so a 0.1 grid loses at most 0.2 per hour
    assert solution.objective >= coarse - 1e-5
    assert solution.objective <= coarse + 2 * 2.0 * 0.1 + 1e-6

    refined = base + _refined_margin(0.8, 30.0, first) + _refined_margin(1.0, 40.0, second)
    assert refined == pytest.approx(12.4 + 6.4 + 10.0, abs=1e-6)
    assert solution.objective == pytest.approx(refined, abs=1e-3)

    schedule = extract_solution(compiled, solution)
    assert schedule.lem_price == pytest.approx([38.0, 90.0], abs=1e-3)
    assert schedule.mg_schedule["MG1"]["pmg"] == pytest.approx([0.8, 0.2], abs=1e-4)
    assert schedule.wem_purchase == pytest.approx([1.8, 1.0], abs=1e-4)
    assert schedule.duality_revenue["MG1"] == pytest.approx(38.0 * 0.8 + 90.0 * 0.2, abs=2e-3)
    assert all(loss == pytest.approx(0.0, abs=1e-9) for loss in schedule.losses[0])


def test_flexibility_never_raises_profit():
    network, microgrids, market, config = random_case(11, horizon=3, buses=3, microgrids=1, disco_dgs=1)
    scenarios = ScenarioSet.single(3)
    profits = {}
    for enabled in (False, True):
        case_config = config.with_overrides(flexibility_enabled=enabled, initial_purchase=0.5)
        compiled = assemble_milp(network, microgrids, scenarios, market, case_config)
        solution = solve_milp(compiled.model, HIGHS)
        assert solution.is_optimal
        worst, _ = verify_solution(compiled.model, solution.values, 1e-5)
        assert worst is None
        profits[enabled] = solution.objective
        if enabled:
            schedule = extract_solution(compiled, solution)
            ramps = np.diff([0.5] + schedule.wem_purchase)
            assert np.all(np.abs(ramps) <= np.array(schedule.delta_f) + 1e-5)
    assert profits[True] <= profits[False] + 1e-5 * max(1.0, abs(profits[False]))


def test_big_m_check_flags_active_constants(microgrid):
    network, microgrids, market, config = two_bus_case(load=[1.0, 0.8], microgrid=microgrid)
    compiled = assemble_milp(network, microgrids, ScenarioSet.single(2), market, config)
    solution = solve_milp(compiled.model, HIGHS)
    assert solution.is_optimal

    block = compiled.blocks["MG1"]
    _, _, mu = block.values(solution.values)
    peak = float(mu.max())
    assert peak > 0.0
    block.encoding = ComplementarityEncoding(block.kkt, block.encoding.big_m_primal, [peak] * len(mu))
    warnings = check_big_m(compiled, solution)
    assert any(w.startswith("dual of MG1_") for w in warnings)


def test_index_set_mismatches(microgrid):
    network, microgrids, market, config = two_bus_case(load=[1.0, 0.8], microgrid=microgrid)
    with pytest.raises(IndexSetMismatchError):
        assemble_milp(network, microgrids, ScenarioSet.single(3), market, config)

    twin = make_microgrid(mg_id="MG2", bus_id=2, demand=[1.0, 1.0])
    with pytest.raises(IndexSetMismatchError):
        assemble_milp(network, microgrids + [twin], ScenarioSet.single(2), market, config)

    stray = make_microgrid(mg_id="MG3", bus_id=7, demand=[1.0, 1.0])
    with pytest.raises(IndexSetMismatchError):
        assemble_milp(network, [stray], ScenarioSet.single(2), market, config)


@pytest.mark.parametrize("seed", range(100))
def test_duality_revenue_matches_primal_payment(seed):
    network, microgrids, market, config = random_case(seed, horizon=3, buses=3, microgrids=2)
    compiled = assemble_milp(network, microgrids, ScenarioSet.single(3), market, config)
    solution = solve_milp(compiled.model, HIGHS)
    assert solution.is_optimal

    schedule = extract_solution(compiled, solution)
    for mg_id, revenue in schedule.duality_revenue.items():
        payment = float(np.dot(schedule.lem_price, schedule.mg_schedule[mg_id]["pmg"]))
        assert revenue == pytest.approx(payment, abs=1e-4 * max(1.0, abs(payment)))
