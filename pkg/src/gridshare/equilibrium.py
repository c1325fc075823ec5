"""Equilibrium and social-optimum analysis of the sharing market.

The strategic game (every prosumer best-responding through the market)
has the same solutions as one centralized QP: minimize the sum of
disutilities plus a quadratic self-impact term in the net purchases,
subject to pool balance and line capacities.  ``solve_gne`` builds and
solves that QP, recovers the supporting bids and prices, and returns
the whole bundle.  ``solve_social_optimum`` drops the self-impact term
and gives the efficiency benchmark the equilibrium is measured
against.

The remaining entry points are diagnostics built on those two solvers:
iterated best-response dynamics, detection of payoff-equivalent
equilibrium continua under congestion, a verification report of the
structural guarantees (participation is never a loss, prices decompose
into energy plus congestion components, platform revenue equals
congestion rent, the efficiency gap obeys an explicit bound), resource
partitioning, and the scenario sweeps behind the CLI reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qp
from .clearing import BidProfile, ClearingResult, clear_market, regulate_prices
from .network import Network
from .prosumer import (BestResponse, Prosumer, best_response, disutility,
                       individual_cost, regulated_cost, split_dispatch)

__all__ = [
    "Scenario", "EquilibriumResult", "SocialOutcome", "BrdResult",
    "ContinuumReport", "EquilibriumDiagnostics", "FlowSweepRow", "CountSweepRow",
    "solve_gne", "solve_social_optimum", "best_response_dynamics",
    "detect_continuum", "verify_equilibrium", "equal_partition",
    "flow_sweep", "count_sweep", "random_scenario",
]


@dataclass(frozen=True, eq=False)
class Scenario:
    """A market instance: network, participants, demand slope."""

    network: Network
    prosumers: tuple[Prosumer, ...]
    a: float

    def __post_init__(self):
        prosumers = tuple(self.prosumers)
        if len(prosumers) < 2:
            raise ValueError("a sharing market needs at least two prosumers")
        if not self.a > 0:
            raise ValueError(f"demand slope a must be positive, got {self.a}")
        for rank, prosumer in enumerate(prosumers):
            if prosumer.index != rank:
                raise ValueError(f"prosumer at position {rank} carries index {prosumer.index}")
            if not 0 <= prosumer.bus < self.network.n_buses:
                raise ValueError(f"prosumer {rank} sits on bus {prosumer.bus}, "
                                 f"network has {self.network.n_buses} buses")
        object.__setattr__(self, "prosumers", prosumers)
        object.__setattr__(self, "a", float(self.a))

    @property
    def n_prosumers(self) -> int:
        return len(self.prosumers)

    @property
    def buses(self) -> np.ndarray:
        return np.array([p.bus for p in self.prosumers])

    @property
    def reductions(self) -> np.ndarray:
        return np.array([p.reduction for p in self.prosumers])

    @property
    def agg_coeffs(self) -> np.ndarray:
        return np.array([p.agg_coeff for p in self.prosumers])

    def prosumer_sensitivity(self) -> np.ndarray:
        """Line sensitivity to each prosumer's net injection."""
        return self.network.sensitivity[:, self.buses]


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    """Dispatch, market outcome, and duals of the equilibrium QP.

    ``quantities`` are net purchases (reduction minus own dispatch),
    identical to what clearing the recovered ``bids`` produces.
    ``balance_dual`` and the flow dual pairs come from the centralized
    QP; prices satisfy
    ``price_i = -balance_dual - sens_i @ (flow_lower - flow_upper)``.
    """

    totals: np.ndarray
    dispatch: tuple[np.ndarray, ...]
    quantities: np.ndarray
    prices: np.ndarray
    bids: np.ndarray
    balance_dual: float
    flow_lower_duals: np.ndarray
    flow_upper_duals: np.ndarray
    flows: np.ndarray
    binding_lines: tuple[int, ...]
    prosumer_costs: np.ndarray
    total_disutility: float
    platform_revenue: float
    iterations: int


@dataclass(frozen=True, eq=False)
class SocialOutcome:
    """Minimum-total-disutility dispatch under the same constraints."""

    totals: np.ndarray
    dispatch: tuple[np.ndarray, ...]
    quantities: np.ndarray
    prices: np.ndarray  # marginal disutilities, the efficient price signal
    balance_dual: float
    flow_lower_duals: np.ndarray
    flow_upper_duals: np.ndarray
    flows: np.ndarray
    binding_lines: tuple[int, ...]
    total_disutility: float
    iterations: int


def _dispatch_layout(scenario: Scenario):
    counts = [p.n_resources for p in scenario.prosumers]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return counts, offsets, int(offsets[-1])


def _split_rows(scenario: Scenario, x: np.ndarray, offsets) -> tuple[np.ndarray, ...]:
    return tuple(x[offsets[i]:offsets[i + 1]].copy()
                 for i in range(scenario.n_prosumers))


def solve_gne(scenario: Scenario) -> EquilibriumResult:
    """Compute the (variational) generalized Nash equilibrium.

    Variables are the per-resource outputs plus one net-purchase
    variable per prosumer, linked by ``sum(outputs) + purchase ==
    reduction``.  The objective adds to the total disutility a term
    ``purchase**2 / (2 a (n - 1))`` per prosumer, which is what makes
    the QP's optimality conditions coincide with every prosumer
    best-responding through the market.
    """
    n = scenario.n_prosumers
    a = scenario.a
    counts, offsets, n_outputs = _dispatch_layout(scenario)
    n_vars = n_outputs + n

    hessian = np.empty(n_vars)
    for i, prosumer in enumerate(scenario.prosumers):
        hessian[offsets[i]:offsets[i + 1]] = 2.0 * np.array(prosumer.cost_coeffs)
    hessian[n_outputs:] = 1.0 / (a * (n - 1))

    # One balance row over outputs, one linking row per prosumer.
    eq = np.zeros((1 + n, n_vars))
    rhs = np.zeros(1 + n)
    eq[0, :n_outputs] = 1.0
    rhs[0] = scenario.reductions.sum()
    for i in range(n):
        eq[1 + i, offsets[i]:offsets[i + 1]] = 1.0
        eq[1 + i, n_outputs + i] = 1.0
        rhs[1 + i] = scenario.prosumers[i].reduction

    sens = scenario.prosumer_sensitivity()
    limits = scenario.network.flow_limits
    ranges = np.zeros((scenario.network.n_lines, n_vars))
    ranges[:, n_outputs:] = sens

    start = np.zeros(n_vars)
    for i, prosumer in enumerate(scenario.prosumers):
        start[offsets[i]:offsets[i + 1]] = split_dispatch(prosumer, prosumer.reduction).outputs

    problem = qp.QpProblem(
        hessian=hessian, gradient=np.zeros(n_vars),
        eq_matrix=eq, eq_rhs=rhs,
        range_matrix=ranges, range_lower=-limits, range_upper=limits,
    )
    solution = qp.solve(problem, start=start)

    dispatch = _split_rows(scenario, solution.x, offsets)
    totals = np.array([d.sum() for d in dispatch])
    quantities = solution.x[n_outputs:].copy()
    aggs = scenario.agg_coeffs
    prices = 2.0 * aggs * totals - quantities / (a * (n - 1))
    bids = quantities + a * prices
    costs = np.array([
        disutility(p, d) + prices[i] * quantities[i]
        for i, (p, d) in enumerate(zip(scenario.prosumers, dispatch))
    ])
    flows = sens @ quantities
    binding = tuple(int(j) for j, s in enumerate(solution.statuses) if s != "free")
    return EquilibriumResult(
        totals=totals,
        dispatch=dispatch,
        quantities=quantities,
        prices=prices,
        bids=bids,
        balance_dual=float(solution.eq_duals[0]),
        flow_lower_duals=solution.lower_duals,
        flow_upper_duals=solution.upper_duals,
        flows=flows,
        binding_lines=binding,
        prosumer_costs=costs,
        total_disutility=float(sum(disutility(p, d)
                                   for p, d in zip(scenario.prosumers, dispatch))),
        platform_revenue=float(prices @ quantities),
        iterations=solution.iterations,
    )


def solve_social_optimum(scenario: Scenario) -> SocialOutcome:
    """Minimize total disutility under balance and line capacities.

    Net purchases are eliminated (they equal reduction minus output
    total), leaving a QP in the outputs alone.
    """
    n = scenario.n_prosumers
    counts, offsets, n_outputs = _dispatch_layout(scenario)

    hessian = np.empty(n_outputs)
    for i, prosumer in enumerate(scenario.prosumers):
        hessian[offsets[i]:offsets[i + 1]] = 2.0 * np.array(prosumer.cost_coeffs)

    eq = np.ones((1, n_outputs))
    rhs = np.array([scenario.reductions.sum()])

    sens = scenario.prosumer_sensitivity()
    limits = scenario.network.flow_limits
    shift = sens @ scenario.reductions
    ranges = np.zeros((scenario.network.n_lines, n_outputs))
    for i in range(n):
        ranges[:, offsets[i]:offsets[i + 1]] = -sens[:, [i]]

    start = np.zeros(n_outputs)
    for i, prosumer in enumerate(scenario.prosumers):
        start[offsets[i]:offsets[i + 1]] = split_dispatch(prosumer, prosumer.reduction).outputs

    problem = qp.QpProblem(
        hessian=hessian, gradient=np.zeros(n_outputs),
        eq_matrix=eq, eq_rhs=rhs,
        range_matrix=ranges, range_lower=-limits - shift, range_upper=limits - shift,
    )
    solution = qp.solve(problem, start=start)

    dispatch = _split_rows(scenario, solution.x, offsets)
    totals = np.array([d.sum() for d in dispatch])
    quantities = scenario.reductions - totals
    prices = 2.0 * scenario.agg_coeffs * totals
    flows = sens @ quantities
    binding = tuple(int(j) for j, s in enumerate(solution.statuses) if s != "free")
    return SocialOutcome(
        totals=totals,
        dispatch=dispatch,
        quantities=quantities,
        prices=prices,
        balance_dual=float(solution.eq_duals[0]),
        flow_lower_duals=solution.lower_duals,
        flow_upper_duals=solution.upper_duals,
        flows=flows,
        binding_lines=binding,
        total_disutility=float(sum(disutility(p, d)
                                   for p, d in zip(scenario.prosumers, dispatch))),
        iterations=solution.iterations,
    )


@dataclass(frozen=True, eq=False)
class BrdResult:
    """Trajectory of iterated best responses over bid profiles."""

    trajectory: np.ndarray  # (rounds + 1, n_prosumers), row 0 is the start
    converged: bool
    rounds: int
    bids: np.ndarray
    quantities: np.ndarray
    prices: np.ndarray


def best_response_dynamics(scenario: Scenario, initial_bids: np.ndarray | None = None,
                           mode: str = "sequential", tol: float = 1e-8,
                           max_rounds: int = 500) -> BrdResult:
    """Iterate best responses until the bid profile stops moving.

    ``mode`` "sequential" updates prosumers one at a time inside a
    round (Gauss-Seidel); "simultaneous" updates all from the same
    snapshot (Jacobi).  Non-convergence within ``max_rounds`` is
    reported through the ``converged`` flag, not raised: divergence of
    the iteration is a legitimate finding about a scenario.
    """
    if mode not in ("sequential", "simultaneous"):
        raise ValueError(f"unknown best-response dynamics mode {mode!r}")
    n = scenario.n_prosumers
    if initial_bids is None:
        bids = np.zeros(n)
    else:
        bids = np.asarray(initial_bids, dtype=float).copy()
        if bids.shape != (n,):
            raise ValueError(f"initial bids must have shape ({n},)")
    history = [bids.copy()]
    warm: list[tuple[str, ...] | None] = [None] * n
    converged = False
    for _ in range(max_rounds):
        previous = bids.copy()
        if mode == "sequential":
            for i in range(n):
                response = best_response(scenario, i, bids, warm=warm[i])
                bids[i] = response.bid
        else:
            snapshot = bids.copy()
            for i in range(n):
                response = best_response(scenario, i, snapshot, warm=warm[i])
                bids[i] = response.bid
        history.append(bids.copy())
        if np.abs(bids - previous).max() <= tol:
            converged = True
            break
    result = clear_market(scenario.network, BidProfile(bids=bids, a=scenario.a),
                          scenario.buses)
    return BrdResult(
        trajectory=np.array(history),
        converged=converged,
        rounds=len(history) - 1,
        bids=bids,
        quantities=result.quantities,
        prices=result.prices,
    )


@dataclass(frozen=True, eq=False)
class ContinuumReport:
    """Outcome of probing for payoff-equivalent equilibrium bids.

    When congestion splits prices, shifting every bid along the
    cleared quantities by a common price offset leaves all quantities
    unchanged; each such profile that no prosumer can profitably
    deviate from is a distinct equilibrium.  ``passing_bids`` holds
    the profiles that survived the deviation check.
    """

    congested: bool
    isolated: bool
    offsets: np.ndarray
    passing_offsets: np.ndarray
    passing_bids: tuple[np.ndarray, ...]
    max_improvement: float
    message: str


def detect_continuum(scenario: Scenario, samples: int = 21, span: float = 10.0,
                     deviation_points: int = 60, tol: float = 1e-6) -> ContinuumReport:
    """Probe whether the equilibrium is unique or one of a continuum.

    Starting from the computed equilibrium, candidate profiles
    ``bids = quantities + a * offset`` are sampled for ``offset`` on a
    grid of width ``2 * span`` around the mean equilibrium price.  A
    candidate passes if no prosumer can reduce its regulated cost by
    more than ``tol``, checked against both the exact best-response QP
    and a grid-plus-refinement search through full market clearings.
    """
    equilibrium = solve_gne(scenario)
    flow_duals = max(float(equilibrium.flow_lower_duals.max(initial=0.0)),
                     float(equilibrium.flow_upper_duals.max(initial=0.0)))
    congested = flow_duals > 1e-7
    if not congested:
        return ContinuumReport(
            congested=False, isolated=True,
            offsets=np.zeros(0), passing_offsets=np.zeros(0), passing_bids=(),
            max_improvement=0.0,
            message="no line congested at equilibrium: prices are uniform and "
                    "the equilibrium bid profile is unique",
        )
    a = scenario.a
    n = scenario.n_prosumers
    center = float(equilibrium.prices.mean())
    offsets = np.linspace(center - span, center + span, samples)
    passing: list[float] = []
    bids_passing: list[np.ndarray] = []
    worst_seen = 0.0
    for offset in offsets:
        candidate = equilibrium.quantities + a * offset
        improvement = _best_deviation_gain(scenario, candidate, deviation_points)
        worst_seen = max(worst_seen, improvement)
        if improvement <= tol:
            passing.append(float(offset))
            bids_passing.append(candidate)
    isolated = len(passing) <= 1
    message = (f"{len(passing)} of {samples} sampled profiles are deviation-proof; "
               + ("equilibrium appears isolated" if isolated
                  else "congestion sustains a continuum of equilibria"))
    return ContinuumReport(
        congested=True, isolated=isolated,
        offsets=offsets, passing_offsets=np.array(passing),
        passing_bids=tuple(bids_passing),
        max_improvement=worst_seen,
        message=message,
    )


def _best_deviation_gain(scenario: Scenario, bids: np.ndarray, grid_points: int) -> float:
    """Largest regulated-cost saving any single deviation achieves."""
    a = scenario.a
    n = scenario.n_prosumers
    worst = 0.0
    base = clear_market(scenario.network, BidProfile(bids=bids, a=a), scenario.buses)
    for i, prosumer in enumerate(scenario.prosumers):
        current = regulated_cost(prosumer, float(base.prices[i]), float(bids[i]), a, n)

        def cost_at(bid: float, _i=i, _p=prosumer) -> float:
            trial = bids.copy()
            trial[_i] = bid
            cleared = clear_market(scenario.network, BidProfile(bids=trial, a=a),
                                   scenario.buses)
            return regulated_cost(_p, float(cleared.prices[_i]), bid, a, n)

        best = best_response(scenario, i, bids, method="qp")
        candidate = cost_at(best.bid)
        # Independent coarse search so the QP reduction is not trusted alone.
        radius = max(4.0 * a, 0.5 * abs(bids[i]))
        grid = np.linspace(bids[i] - radius, bids[i] + radius, grid_points)
        values = [cost_at(b) for b in grid]
        k = int(np.argmin(values))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, grid_points - 1)]
        refined = _refine_min(cost_at, lo, hi)
        candidate = min(candidate, min(values), refined)
        worst = max(worst, current - candidate)
    return worst


def _refine_min(f, lo: float, hi: float, iterations: int = 40) -> float:
    ratio = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - ratio * (hi - lo)
    x2 = lo + ratio * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iterations):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - ratio * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + ratio * (hi - lo)
            f2 = f(x2)
    return min(f1, f2)


@dataclass(frozen=True, eq=False)
class EquilibriumDiagnostics:
    """Machine-checkable consequences of the market design.

    Every field is phrased so that zero (or ``True``) is good.  The
    gap bound uses the largest line capacity times the largest number
    of lines at one bus, divided by ``a * (n - 1)``: congestion can
    distort any single prosumer's trade by at most the capacity of the
    lines around it.
    """

    individual_costs: np.ndarray
    prosumer_costs: np.ndarray
    participation_margins: np.ndarray  # individual minus market cost, >= 0
    pareto_ok: bool
    price_decomposition_residual: float
    regulated_price_residual: float
    reclear_residual: float
    platform_revenue: float
    congestion_rent: float
    revenue_residual: float
    per_capita_gap: float
    gap_bound: float
    gap_ok: bool
    social_cost: float


def verify_equilibrium(scenario: Scenario, equilibrium: EquilibriumResult,
                       social: SocialOutcome | None = None) -> EquilibriumDiagnostics:
    """Check an equilibrium against the design's structural guarantees."""
    n = scenario.n_prosumers
    a = scenario.a
    baseline = np.array([individual_cost(p) for p in scenario.prosumers])
    margins = baseline - equilibrium.prosumer_costs

    sens = scenario.prosumer_sensitivity()
    # price decomposition: energy component plus congestion components
    decomposed = (-equilibrium.balance_dual
                  - sens.T @ equilibrium.flow_lower_duals
                  + sens.T @ equilibrium.flow_upper_duals)
    price_residual = float(np.abs(equilibrium.prices - decomposed).max())

    cleared = clear_market(scenario.network,
                           BidProfile(bids=equilibrium.bids, a=a), scenario.buses)
    reclear_residual = float(np.abs(cleared.quantities - equilibrium.quantities).max())
    regulated = regulate_prices(cleared, scenario.prosumers, a)
    regulated_residual = float(np.abs(regulated - equilibrium.prices).max())

    revenue = float(regulated @ cleared.quantities)
    limits = scenario.network.flow_limits
    rent_duals = equilibrium.flow_lower_duals + equilibrium.flow_upper_duals
    finite = np.isfinite(limits)
    congestion_rent = float((limits[finite] * rent_duals[finite]).sum())
    revenue_residual = abs(revenue - congestion_rent)

    if social is None:
        social = solve_social_optimum(scenario)
    gap = (equilibrium.total_disutility - social.total_disutility) / n
    bound = scenario.network.max_degree * scenario.network.max_flow_limit / (a * (n - 1))
    return EquilibriumDiagnostics(
        individual_costs=baseline,
        prosumer_costs=equilibrium.prosumer_costs,
        participation_margins=margins,
        pareto_ok=bool(margins.min() >= -1e-7),
        price_decomposition_residual=price_residual,
        regulated_price_residual=regulated_residual,
        reclear_residual=reclear_residual,
        platform_revenue=revenue,
        congestion_rent=congestion_rent,
        revenue_residual=revenue_residual,
        per_capita_gap=float(gap),
        gap_bound=float(bound),
        gap_ok=bool(-1e-7 <= gap <= bound + 1e-7),
        social_cost=social.total_disutility,
    )


def equal_partition(scenario: Scenario, equilibrium: EquilibriumResult,
                    parts: int) -> Scenario:
    """Split every prosumer into ``parts`` smaller ones.

    Each child inherits a consecutive block of the parent's resources
    and owes the block's equilibrium output minus an equal share of
    the parent's equilibrium net purchase.  Child obligations sum to
    the parent's, so the aggregate problem is unchanged while the
    market gains participants.
    """
    if parts < 1:
        raise ValueError("parts must be at least 1")
    kinds = {p.n_resources for p in scenario.prosumers}
    if len(kinds) != 1:
        raise ValueError("partition requires every prosumer to have the same "
                         f"number of resources, got {sorted(kinds)}")
    k = kinds.pop()
    if k % parts:
        raise ValueError(f"cannot split {k} resources into {parts} equal blocks")
    block = k // parts
    children: list[Prosumer] = []
    for i, parent in enumerate(scenario.prosumers):
        outputs = equilibrium.dispatch[i]
        surplus = float(outputs.sum() - parent.reduction)  # equals -quantity_i
        for m in range(parts):
            segment = slice(m * block, (m + 1) * block)
            children.append(Prosumer(
                index=len(children),
                bus=parent.bus,
                cost_coeffs=parent.cost_coeffs[segment],
                reduction=float(outputs[segment].sum()) - surplus / parts,
            ))
    return Scenario(network=scenario.network, prosumers=tuple(children), a=scenario.a)


@dataclass(frozen=True, eq=False)
class FlowSweepRow:
    """Equilibrium vs social optimum at one uniform capacity level."""

    limit: float
    gne_cost: float
    sco_cost: float
    relative_gap: float
    gne_price_variance: float
    sco_price_variance: float
    gne_prices: np.ndarray
    sco_prices: np.ndarray


def _with_uniform_limit(network: Network, limit: float) -> Network:
    from .network import Line

    lines = tuple(Line(l.from_bus, l.to_bus, l.reactance, float(limit))
                  for l in network.lines)
    return Network(n_buses=network.n_buses, lines=lines, slack=network.slack)


def flow_sweep(scenario: Scenario, limits) -> tuple[FlowSweepRow, ...]:
    """Re-solve equilibrium and social optimum over capacity levels."""
    rows = []
    for limit in limits:
        capped = Scenario(network=_with_uniform_limit(scenario.network, float(limit)),
                          prosumers=scenario.prosumers, a=scenario.a)
        equilibrium = solve_gne(capped)
        social = solve_social_optimum(capped)
        rel = ((equilibrium.total_disutility - social.total_disutility)
               / abs(social.total_disutility)) if social.total_disutility else 0.0
        rows.append(FlowSweepRow(
            limit=float(limit),
            gne_cost=equilibrium.total_disutility,
            sco_cost=social.total_disutility,
            relative_gap=float(rel),
            gne_price_variance=float(np.var(equilibrium.prices)),
            sco_price_variance=float(np.var(social.prices)),
            gne_prices=equilibrium.prices,
            sco_prices=social.prices,
        ))
    return tuple(rows)


@dataclass(frozen=True, eq=False)
class CountSweepRow:
    """Efficiency-gap statistics at one market size."""

    count: int
    scenarios: int
    avg_gap: float
    min_gap: float
    max_gap: float
    avg_relative_gap: float
    gap_bound: float


def random_scenario(rng: np.random.Generator, network: Network, count: int,
                    resources: int = 1, a: float = 1.0,
                    coeff_range: tuple[float, float] = (1.0, 5.0),
                    reduction_range: tuple[float, float] = (-5.0, 12.0)) -> Scenario:
    """Draw a market instance on a fixed network.

    Prosumers land on buses round-robin; coefficients and reductions
    are uniform over the given ranges.  Deterministic in ``rng``.
    """
    prosumers = []
    for i in range(count):
        coeffs = tuple(rng.uniform(*coeff_range, size=resources).tolist())
        reduction = float(rng.uniform(*reduction_range))
        prosumers.append(Prosumer(index=i, bus=i % network.n_buses,
                                  cost_coeffs=coeffs, reduction=reduction))
    return Scenario(network=network, prosumers=tuple(prosumers), a=a)


def count_sweep(network: Network, counts, seed: int, scenarios_per_count: int = 10,
                resources: int = 1, a: float = 1.0,
                coeff_range: tuple[float, float] = (1.0, 5.0),
                reduction_range: tuple[float, float] = (-5.0, 12.0),
                ) -> tuple[CountSweepRow, ...]:
    """Average per-capita efficiency gap as the market grows.

    A fresh generator seeded with ``seed`` drives all draws, so the
    table is reproducible from the seed alone.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for count in counts:
        gaps = []
        rels = []
        for _ in range(scenarios_per_count):
            scenario = random_scenario(rng, network, int(count), resources=resources,
                                       a=a, coeff_range=coeff_range,
                                       reduction_range=reduction_range)
            equilibrium = solve_gne(scenario)
            social = solve_social_optimum(scenario)
            gap = (equilibrium.total_disutility - social.total_disutility) / count
            gaps.append(gap)
            rels.append((equilibrium.total_disutility - social.total_disutility)
                        / abs(social.total_disutility) if social.total_disutility else 0.0)
        bound = network.max_degree * network.max_flow_limit / (a * (int(count) - 1))
        rows.append(CountSweepRow(
            count=int(count),
            scenarios=scenarios_per_count,
            avg_gap=float(np.mean(gaps)),
            min_gap=float(np.min(gaps)),
            max_gap=float(np.max(gaps)),
            avg_relative_gap=float(np.mean(rels)),
            gap_bound=float(bound),
        ))
    return tuple(rows)
