"""Equilibrium-layer tests.

Frozen numbers come from closed-form work on the two-prosumer line
instance: the uncongested equilibrium lands on totals (38/7, 32/7)
with bids (190/7, 32), and capping the line at 2 moves it to totals
(5, 5) with bids (25, 35).  The four-prosumer partition instance has
equilibrium disutility 199694/1369.  A general-purpose NLP solver
recomputes the equilibrium from scratch as an independent route.
"""

import numpy as np
import pytest
from scipy.optimize import LinearConstraint, minimize

from gridshare.equilibrium import (
    Scenario,
    best_response_dynamics,
    count_sweep,
    detect_continuum,
    equal_partition,
    flow_sweep,
    random_scenario,
    solve_gne,
    solve_social_optimum,
    verify_equilibrium,
)
from gridshare.network import Line, Network
from gridshare.prosumer import Prosumer, best_response, regulated_cost

from conftest import make_benchmark, make_triangle


def test_uncongested_equilibrium_frozen(benchmark):
    eq = solve_gne(benchmark)
    np.testing.assert_allclose(eq.totals, [38.0 / 7.0, 32.0 / 7.0], atol=1e-9)
    np.testing.assert_allclose(eq.quantities, [-17.0 / 7.0, 17.0 / 7.0], atol=1e-9)
    np.testing.assert_allclose(eq.bids, [190.0 / 7.0, 32.0], atol=1e-9)
    np.testing.assert_allclose(eq.prices, [207.0 / 7.0, 207.0 / 7.0], atol=1e-9)
    np.testing.assert_allclose(eq.prosumer_costs, [13.0 / 7.0, 7103.0 / 49.0], atol=1e-9)
    assert eq.total_disutility == pytest.approx(7194.0 / 49.0, abs=1e-9)
    assert eq.platform_revenue == pytest.approx(0.0, abs=1e-9)
    assert eq.binding_lines == ()


def test_congested_equilibrium_frozen(benchmark_congested):
    eq = solve_gne(benchmark_congested)
    np.testing.assert_allclose(eq.totals, [5.0, 5.0], atol=1e-9)
    np.testing.assert_allclose(eq.quantities, [-2.0, 2.0], atol=1e-9)
    np.testing.assert_allclose(eq.bids, [25.0, 35.0], atol=1e-9)
    np.testing.assert_allclose(eq.prices, [27.0, 33.0], atol=1e-9)
    assert eq.balance_dual == pytest.approx(-27.0, abs=1e-9)
    np.testing.assert_allclose(eq.flow_lower_duals, [6.0], atol=1e-9)
    np.testing.assert_allclose(eq.flow_upper_duals, [0.0], atol=1e-9)
    assert eq.binding_lines == (0,)
    np.testing.assert_allclose(eq.prosumer_costs, [8.5, 153.5], atol=1e-9)
    assert eq.total_disutility == pytest.approx(150.0, abs=1e-9)
    assert eq.platform_revenue == pytest.approx(12.0, abs=1e-9)


def test_social_optimum_frozen(benchmark, benchmark_congested):
    wide = solve_social_optimum(benchmark)
    np.testing.assert_allclose(wide.totals, [35.0 / 6.0, 25.0 / 6.0], atol=1e-9)
    assert wide.total_disutility == pytest.approx(875.0 / 6.0, abs=1e-9)
    # the unconstrained optimum equalizes marginal disutilities
    np.testing.assert_allclose(wide.prices, [175.0 / 6.0, 175.0 / 6.0], atol=1e-9)

    tight = solve_social_optimum(benchmark_congested)
    np.testing.assert_allclose(tight.totals, [5.0, 5.0], atol=1e-9)
    assert tight.total_disutility == pytest.approx(150.0, abs=1e-9)
    np.testing.assert_allclose(tight.prices, [25.0, 35.0], atol=1e-9)
    assert tight.binding_lines == (0,)


def _reference_equilibrium(scenario):
    """Recompute the equilibrium with a general-purpose NLP solver."""
    n = scenario.n_prosumers
    a = scenario.a
    cbar = scenario.agg_coeffs
    demands = scenario.reductions
    sens = scenario.prosumer_sensitivity()
    limits = scenario.network.flow_limits
    eye = np.eye(n)
    zero = np.zeros((1, n))

    def objective(x):
        totals, trades = x[:n], x[n:]
        return float(cbar @ totals**2 + (trades**2).sum() / (2.0 * a * (n - 1)))

    def gradient(x):
        totals, trades = x[:n], x[n:]
        return np.concatenate([2.0 * cbar * totals, trades / (a * (n - 1))])

    constraints = [
        LinearConstraint(np.hstack([eye, eye]), demands, demands),
        LinearConstraint(np.hstack([zero, np.ones((1, n))]), 0.0, 0.0),
        LinearConstraint(np.hstack([np.zeros_like(sens), sens]), -limits, limits),
    ]
    start = np.concatenate([demands, np.zeros(n)])
    result = minimize(objective, start, jac=gradient, method="trust-constr",
                      constraints=constraints,
                      options={"gtol": 1e-12, "xtol": 1e-14, "maxiter": 2000})
    assert result.success
    return result.x[:n], result.x[n:]


@pytest.mark.parametrize("flow_limit", [10.0, 2.0])
def test_gne_matches_general_solver(flow_limit):
    scenario = make_triangle(flow_limit=flow_limit)
    eq = solve_gne(scenario)
    totals, trades = _reference_equilibrium(scenario)
    np.testing.assert_allclose(eq.totals, totals, atol=1e-6)
    np.testing.assert_allclose(eq.quantities, trades, atol=1e-6)
    prices = 2.0 * scenario.agg_coeffs * totals - trades / (scenario.a * 2.0)
    np.testing.assert_allclose(eq.bids, trades + scenario.a * prices, atol=1e-5)


@pytest.mark.parametrize("build,limit", [
    (make_benchmark, 10.0), (make_benchmark, 2.0), (make_triangle, 2.0)])
def test_equilibrium_is_mutual_best_response(build, limit):
    scenario = build(flow_limit=limit)
    eq = solve_gne(scenario)
    for i in range(scenario.n_prosumers):
        reply = best_response(scenario, i, eq.bids)
        assert reply.bid == pytest.approx(eq.bids[i], abs=1e-7)
        assert reply.cost == pytest.approx(eq.prosumer_costs[i], abs=1e-7)


def test_diagnostics_uncongested(benchmark):
    eq = solve_gne(benchmark)
    social = solve_social_optimum(benchmark)
    checks = verify_equilibrium(benchmark, eq, social)
    assert checks.price_decomposition_residual <= 1e-8
    assert checks.regulated_price_residual <= 1e-8
    assert checks.reclear_residual <= 1e-8
    assert checks.revenue_residual <= 1e-8
    assert checks.platform_revenue == pytest.approx(0.0, abs=1e-9)
    assert checks.congestion_rent == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(checks.individual_costs, [22.5, 171.5], atol=1e-12)
    np.testing.assert_allclose(checks.participation_margins,
                               [144.5 / 7.0, 1300.5 / 49.0], atol=1e-9)
    assert checks.pareto_ok
    assert checks.per_capita_gap == pytest.approx(
        (7194.0 / 49.0 - 875.0 / 6.0) / 2.0, abs=1e-9)
    assert checks.gap_bound == pytest.approx(10.0)
    assert checks.gap_ok
    assert checks.social_cost == pytest.approx(875.0 / 6.0, abs=1e-9)


def test_diagnostics_congested(benchmark_congested):
    eq = solve_gne(benchmark_congested)
    checks = verify_equilibrium(benchmark_congested, eq)
    assert checks.price_decomposition_residual <= 1e-8
    assert checks.regulated_price_residual <= 1e-8
    assert checks.reclear_residual <= 1e-8
    # platform earns exactly the congestion rent of the binding line
    assert checks.platform_revenue == pytest.approx(12.0, abs=1e-9)
    assert checks.congestion_rent == pytest.approx(12.0, abs=1e-9)
    assert checks.revenue_residual <= 1e-9
    np.testing.assert_allclose(checks.participation_margins, [14.0, 18.0], atol=1e-9)
    assert checks.pareto_ok
    # capacity binds yet the equilibrium dispatch is socially optimal
    assert checks.per_capita_gap == pytest.approx(0.0, abs=1e-9)
    assert checks.gap_bound == pytest.approx(2.0)
    assert checks.gap_ok


def _partition_scenario(flow_limit: float = 10.0) -> Scenario:
    network = Network(2, (Line(0, 1, flow_limit=flow_limit),))
    prosumers = (
        Prosumer(index=0, bus=0, cost_coeffs=(10.0,) * 4, reduction=3.0),
        Prosumer(index=1, bus=1, cost_coeffs=(14.0,) * 4, reduction=7.0),
    )
    return Scenario(network=network, prosumers=prosumers, a=1.0)


def test_partition_aggregates_match_benchmark():
    # four resources at 4x the coefficient aggregate to the benchmark
    scenario = _partition_scenario()
    eq = solve_gne(scenario)
    np.testing.assert_allclose(eq.totals, [38.0 / 7.0, 32.0 / 7.0], atol=1e-9)
    assert eq.total_disutility == pytest.approx(7194.0 / 49.0, abs=1e-9)
    # each parent spreads its total evenly over identical resources
    np.testing.assert_allclose(eq.dispatch[0], np.full(4, 38.0 / 28.0), atol=1e-9)
    np.testing.assert_allclose(eq.dispatch[1], np.full(4, 32.0 / 28.0), atol=1e-9)


def test_partition_children_frozen():
    scenario = _partition_scenario()
    eq = solve_gne(scenario)
    children = equal_partition(scenario, eq, parts=2)
    assert children.n_prosumers == 4
    np.testing.assert_allclose(children.reductions, [1.5, 1.5, 3.5, 3.5], atol=1e-9)
    assert [p.bus for p in children.prosumers] == [0, 0, 1, 1]
    assert children.prosumers[0].cost_coeffs == (10.0, 10.0)
    assert children.prosumers[3].cost_coeffs == (14.0, 14.0)
    # obligations are conserved
    assert children.reductions.sum() == pytest.approx(scenario.reductions.sum())
    child_eq = solve_gne(children)
    assert child_eq.total_disutility == pytest.approx(199694.0 / 1369.0, abs=1e-9)


def test_partition_cost_decreases_with_parts():
    scenario = _partition_scenario()
    eq = solve_gne(scenario)
    social = solve_social_optimum(scenario).total_disutility
    costs = [eq.total_disutility]
    for parts in (2, 4):
        child_eq = solve_gne(equal_partition(scenario, eq, parts))
        costs.append(child_eq.total_disutility)
    assert costs[0] >= costs[1] >= costs[2] >= social - 1e-9
    assert costs[1] == pytest.approx(199694.0 / 1369.0, abs=1e-9)


def test_partition_single_part_is_identity():
    scenario = _partition_scenario()
    eq = solve_gne(scenario)
    same = equal_partition(scenario, eq, parts=1)
    np.testing.assert_allclose(same.reductions, scenario.reductions, atol=1e-12)
    child_eq = solve_gne(same)
    np.testing.assert_allclose(child_eq.totals, eq.totals, atol=1e-9)
    assert child_eq.total_disutility == pytest.approx(eq.total_disutility, abs=1e-9)


def test_partition_rejects_bad_requests():
    scenario = _partition_scenario()
    eq = solve_gne(scenario)
    with pytest.raises(ValueError):
        equal_partition(scenario, eq, parts=3)
    with pytest.raises(ValueError):
        equal_partition(scenario, eq, parts=0)
    mixed = Scenario(
        network=scenario.network,
        prosumers=(Prosumer(0, 0, (10.0,) * 4, 3.0), Prosumer(1, 1, (14.0,) * 2, 7.0)),
        a=1.0)
    mixed_eq = solve_gne(mixed)
    with pytest.raises(ValueError):
        equal_partition(mixed, mixed_eq, parts=2)


def test_brd_first_round_frozen(benchmark):
    result = best_response_dynamics(benchmark)
    np.testing.assert_allclose(result.trajectory[0], [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(result.trajectory[1], [30.0 / 7.0, 128.0 / 9.0],
                               atol=1e-9)
    assert result.converged
    assert result.rounds < 100
    np.testing.assert_allclose(result.bids, [190.0 / 7.0, 32.0], atol=1e-6)
    np.testing.assert_allclose(result.prices, [207.0 / 7.0, 207.0 / 7.0], atol=1e-5)


def test_brd_simultaneous_mode(benchmark):
    result = best_response_dynamics(benchmark, mode="simultaneous")
    assert result.converged
    np.testing.assert_allclose(result.bids, [190.0 / 7.0, 32.0], atol=1e-6)
    assert result.trajectory.shape == (result.rounds + 1, 2)


def test_brd_congested(benchmark_congested):
    result = best_response_dynamics(benchmark_congested)
    assert result.converged
    np.testing.assert_allclose(result.bids, [25.0, 35.0], atol=1e-6)


def test_brd_starting_at_equilibrium(benchmark):
    eq = solve_gne(benchmark)
    result = best_response_dynamics(benchmark, initial_bids=eq.bids)
    assert result.converged
    assert result.rounds == 1
    np.testing.assert_allclose(result.bids, eq.bids, atol=1e-8)


def test_brd_round_cap_reports_nonconvergence(benchmark):
    result = best_response_dynamics(benchmark, max_rounds=1)
    assert not result.converged
    assert result.rounds == 1


def test_brd_rejects_unknown_mode(benchmark):
    with pytest.raises(ValueError):
        best_response_dynamics(benchmark, mode="gauss")


def test_continuum_on_congested_line(benchmark_congested):
    report = detect_continuum(benchmark_congested)
    assert report.congested
    assert not report.isolated
    # hand-derived window: the seller tolerates offsets down to 27,
    # the buyer up to 33; the default grid steps through the integers
    # 20..40, so exactly the seven integers 27..33 survive
    np.testing.assert_allclose(report.passing_offsets, np.arange(27.0, 34.0),
                               atol=1e-9)
    # profiles outside the window are strictly refuted, not borderline
    assert report.max_improvement > 1.0
    for bids in report.passing_bids:
        assert bids[1] - bids[0] == pytest.approx(4.0, abs=1e-9)
    # every profile in the window settles to the equilibrium costs
    for offset, bids in zip(report.passing_offsets, report.passing_bids):
        seller = regulated_cost(benchmark_congested.prosumers[0],
                                float(offset), float(bids[0]), 1.0, 2)
        buyer = regulated_cost(benchmark_congested.prosumers[1],
                               float(offset), float(bids[1]), 1.0, 2)
        assert seller == pytest.approx(8.5, abs=1e-9)
        assert buyer == pytest.approx(153.5, abs=1e-9)


def test_continuum_edge_profiles_are_deviation_proof(benchmark_congested):
    # re-verify the report's extreme profiles from first principles:
    # at a window profile the price vector is uniform at the offset
    # (the mean bid), and no unilateral reply improves on holding
    report = detect_continuum(benchmark_congested)
    for bids in (report.passing_bids[0], report.passing_bids[-1]):
        bids = np.asarray(bids)
        for i in range(2):
            held = regulated_cost(benchmark_congested.prosumers[i],
                                  float(bids.mean()), float(bids[i]), 1.0, 2)
            reply = best_response(benchmark_congested, i, bids)
            assert reply.cost >= held - 1e-6
            assert held == pytest.approx(8.5 if i == 0 else 153.5, abs=1e-9)


def test_no_continuum_without_congestion(benchmark):
    report = detect_continuum(benchmark)
    assert not report.congested
    assert report.isolated
    assert report.passing_offsets.size == 0
    assert "unique" in report.message


def test_flow_sweep_rows(triangle):
    rows = flow_sweep(triangle, (1.0, 2.0, 3.5))
    assert [r.limit for r in rows] == [1.0, 2.0, 3.5]
    costs = [r.gne_cost for r in rows]
    assert costs[0] >= costs[1] >= costs[2] - 1e-9
    for row in rows:
        assert row.gne_cost >= row.sco_cost - 1e-9
        assert row.relative_gap < 5e-4
        assert row.gne_price_variance <= row.sco_price_variance + 1e-9


def test_count_sweep_deterministic(benchmark):
    network = benchmark.network
    first = count_sweep(network, (2, 3), seed=5, scenarios_per_count=3)
    second = count_sweep(network, (2, 3), seed=5, scenarios_per_count=3)
    for a, b in zip(first, second):
        assert a.count == b.count
        assert a.avg_gap == b.avg_gap
        assert a.min_gap == b.min_gap
        assert a.max_gap == b.max_gap
    for row in first:
        assert row.min_gap <= row.avg_gap <= row.max_gap
        assert row.min_gap >= -1e-7
        assert row.gap_bound == pytest.approx(
            network.max_degree * network.max_flow_limit / (row.count - 1))


def test_random_scenario_respects_ranges():
    network = Network(3, (Line(0, 1, flow_limit=4.0), Line(1, 2, flow_limit=4.0)))
    rng = np.random.default_rng(7)
    scenario = random_scenario(rng, network, 7, resources=2, a=2.0,
                               coeff_range=(1.0, 5.0), reduction_range=(-5.0, 12.0))
    assert scenario.n_prosumers == 7
    assert scenario.a == 2.0
    assert [p.bus for p in scenario.prosumers] == [0, 1, 2, 0, 1, 2, 0]
    for p in scenario.prosumers:
        assert p.n_resources == 2
        assert all(1.0 <= c <= 5.0 for c in p.cost_coeffs)
        assert -5.0 <= p.reduction <= 12.0
    again = random_scenario(np.random.default_rng(7), network, 7, resources=2, a=2.0)
    np.testing.assert_allclose(again.reductions, scenario.reductions, atol=0)


def test_scenario_validation(benchmark):
    network = benchmark.network
    with pytest.raises(ValueError):
        Scenario(network=network, prosumers=(Prosumer(0, 0, (1.0,), 1.0),), a=1.0)
    with pytest.raises(ValueError):
        Scenario(network=network,
                 prosumers=(Prosumer(1, 0, (1.0,), 1.0), Prosumer(0, 1, (1.0,), 1.0)),
                 a=1.0)
    with pytest.raises(ValueError):
        Scenario(network=network,
                 prosumers=(Prosumer(0, 0, (1.0,), 1.0), Prosumer(1, 5, (1.0,), 1.0)),
                 a=1.0)
    with pytest.raises(ValueError):
        Scenario(network=network,
                 prosumers=(Prosumer(0, 0, (1.0,), 1.0), Prosumer(1, 1, (1.0,), 1.0)),
                 a=0.0)
