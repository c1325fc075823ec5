"""Prosumer cost model and individual best responses.

Each prosumer owes a fixed load reduction and owns a set of flexible
resources with quadratic disutility ``c_k * p_k**2``.  Spreading a
total reduction across resources in inverse proportion to their
coefficients equalizes marginals, so a prosumer behaves exactly like a
single resource with the aggregate coefficient ``1 / sum(1 / c_k)``.
Everything downstream (market clearing, equilibrium computation) works
with that aggregate and recovers per-resource outputs afterwards.

A prosumer participates in the sharing market through a supply-demand
function ``q = -a * price + bid``: choosing the bid is choosing a
residual demand curve.  ``best_response`` finds the bid minimizing the
prosumer's regulated cost against fixed opponent bids, either through
an equivalent small QP over net purchases or by direct golden-section
search on the bid itself (slower, used to cross-check the reduction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qp

__all__ = [
    "Prosumer", "Dispatch", "BestResponse",
    "split_dispatch", "disutility", "individual_cost",
    "regulated_price", "regulated_cost", "unregulated_cost",
    "best_response",
]


@dataclass(frozen=True)
class Prosumer:
    """One market participant.

    Parameters
    ----------
    index : int
        Position in the scenario's prosumer list.
    bus : int
        Network bus where the prosumer is connected.
    cost_coeffs : tuple[float, ...]
        Quadratic disutility coefficient of each flexible resource;
        all must be positive.
    reduction : float
        Load reduction the prosumer is obligated to deliver, net of
        any market purchases.  May be negative (an obligation to
        absorb).
    """

    index: int
    bus: int
    cost_coeffs: tuple[float, ...]
    reduction: float

    def __post_init__(self):
        if self.index < 0 or self.bus < 0:
            raise ValueError("prosumer index and bus must be nonnegative")
        coeffs = tuple(float(c) for c in self.cost_coeffs)
        if not coeffs:
            raise ValueError(f"prosumer {self.index} needs at least one resource")
        if any(c <= 0 or not np.isfinite(c) for c in coeffs):
            raise ValueError(f"prosumer {self.index} has a non-positive cost coefficient")
        if not np.isfinite(self.reduction):
            raise ValueError(f"prosumer {self.index} has a non-finite reduction")
        object.__setattr__(self, "cost_coeffs", coeffs)
        object.__setattr__(self, "reduction", float(self.reduction))

    @property
    def n_resources(self) -> int:
        return len(self.cost_coeffs)

    @property
    def agg_coeff(self) -> float:
        """Aggregate quadratic coefficient of the pooled resources."""
        return 1.0 / sum(1.0 / c for c in self.cost_coeffs)


@dataclass(frozen=True, eq=False)
class Dispatch:
    """Per-resource outputs delivering a total reduction."""

    outputs: np.ndarray
    total: float
    marginal: float  # common marginal disutility across resources


def split_dispatch(prosumer: Prosumer, total: float) -> Dispatch:
    """Spread ``total`` across resources so marginals equalize."""
    agg = prosumer.agg_coeff
    coeffs = np.array(prosumer.cost_coeffs)
    outputs = agg * total / coeffs
    return Dispatch(outputs=outputs, total=float(total), marginal=2.0 * agg * total)


def disutility(prosumer: Prosumer, dispatch: Dispatch | np.ndarray) -> float:
    outputs = dispatch.outputs if isinstance(dispatch, Dispatch) else np.asarray(dispatch, dtype=float)
    coeffs = np.array(prosumer.cost_coeffs)
    return float((coeffs * outputs * outputs).sum())


def individual_cost(prosumer: Prosumer) -> float:
    """Cost of covering the whole reduction alone, optimally split."""
    return prosumer.agg_coeff * prosumer.reduction**2


def regulated_price(prosumer: Prosumer, price: float, quantity: float,
                    a: float, n_prosumers: int) -> float:
    """Trading price after the platform's no-free-riding adjustment.

    Buyers (``quantity >= 0``) pay at least what the traded energy is
    worth to them at the margin; sellers are paid at most that.  The
    reference rate is the marginal disutility of self-supplying the
    residual, corrected by the quantity's own price impact.
    """
    total = prosumer.reduction - quantity
    reference = 2.0 * prosumer.agg_coeff * total - quantity / (a * (n_prosumers - 1))
    if quantity >= 0:
        return max(price, reference)
    return min(price, reference)


def regulated_cost(prosumer: Prosumer, price: float, bid: float,
                   a: float, n_prosumers: int) -> float:
    """Disutility plus regulated trading cost at a cleared price."""
    quantity = -a * price + bid
    total = prosumer.reduction - quantity
    adjusted = regulated_price(prosumer, price, quantity, a, n_prosumers)
    return prosumer.agg_coeff * total**2 + adjusted * quantity


def unregulated_cost(prosumer: Prosumer, price: float, bid: float, a: float) -> float:
    """Disutility plus raw trading cost, no price regulation."""
    quantity = -a * price + bid
    total = prosumer.reduction - quantity
    return prosumer.agg_coeff * total**2 + price * quantity


@dataclass(frozen=True, eq=False)
class BestResponse:
    bid: float
    quantity: float
    cost: float


def best_response(scenario, index: int, bids: np.ndarray, method: str = "qp",
                  warm: tuple[str, ...] | None = None) -> BestResponse:
    """Cost-minimizing bid for one prosumer against fixed opponents.

    Parameters
    ----------
    scenario : Scenario
        Market setup; supplies the network, ``a``, and the prosumers.
    index : int
        The responding prosumer.
    bids : np.ndarray, shape (n_prosumers,)
        Current bid profile.  Entry ``index`` is ignored.
    method : str
        "qp" solves the equivalent projection problem over net
        purchases (exact).  "search" golden-sections the regulated
        cost along the bid axis, evaluating full market clearings;
        it exists to validate the reduction and is much slower.
    warm : tuple of str, optional
        Active-set statuses from a previous same-shaped response QP.
    """
    if method == "qp":
        return _best_response_qp(scenario, index, bids, warm)
    if method == "search":
        return _best_response_search(scenario, index, bids)
    raise ValueError(f"unknown best-response method {method!r}")


def _response_problem(scenario, index: int, bids: np.ndarray) -> qp.QpProblem:
    # Opponent purchases stay at the projection of their bids while the
    # responder steers its own purchase y_i with an effective quadratic
    # (marginal self-supply cost plus its price impact on the trade).
    n = scenario.n_prosumers
    me = scenario.prosumers[index]
    a = scenario.a
    stiffness = 2.0 * a * me.agg_coeff + 1.0 / (n - 1)
    target = 2.0 * a * me.agg_coeff * me.reduction
    hessian = np.full(n, 2.0)
    gradient = -2.0 * np.asarray(bids, dtype=float).copy()
    hessian[index] = 2.0 * stiffness
    gradient[index] = -2.0 * target
    eq = np.ones((1, n))
    sens = scenario.prosumer_sensitivity()
    limits = scenario.network.flow_limits
    return qp.QpProblem(
        hessian=hessian, gradient=gradient,
        eq_matrix=eq, eq_rhs=np.zeros(1),
        range_matrix=sens, range_lower=-limits, range_upper=limits,
    )


def _best_response_qp(scenario, index: int, bids: np.ndarray,
                      warm: tuple[str, ...] | None) -> BestResponse:
    n = scenario.n_prosumers
    me = scenario.prosumers[index]
    a = scenario.a
    problem = _response_problem(scenario, index, bids)
    solution = qp.solve(problem, start=np.zeros(n), warm=warm)
    y = float(solution.x[index])
    bid = 2.0 * a * me.agg_coeff * (me.reduction - y) + (n - 2) / (n - 1) * y
    price = (bid - y) / a
    cost = regulated_cost(me, price, bid, a, n)
    return BestResponse(bid=bid, quantity=y, cost=cost)


def _best_response_search(scenario, index: int, bids: np.ndarray,
                          tol: float = 1e-9) -> BestResponse:
    from .clearing import BidProfile, clear_market  # local import, avoids a cycle

    me = scenario.prosumers[index]
    n = scenario.n_prosumers
    a = scenario.a
    trial = np.asarray(bids, dtype=float).copy()

    def cost_at(bid: float) -> float:
        trial[index] = bid
        result = clear_market(scenario.network, BidProfile(bids=trial, a=a),
                              scenario.buses)
        return regulated_cost(me, float(result.prices[index]), bid, a, n)

    center = 2.0 * a * me.agg_coeff * me.reduction
    lo, hi = _bracket(cost_at, center, step=max(1.0, abs(center) * 0.5))
    bid = _golden(cost_at, lo, hi, tol)
    trial[index] = bid
    result = clear_market(scenario.network, BidProfile(bids=trial, a=a), scenario.buses)
    price = float(result.prices[index])
    return BestResponse(bid=bid, quantity=float(result.quantities[index]),
                        cost=regulated_cost(me, price, bid, a, n))


def _bracket(f, center: float, step: float, max_expand: int = 60):
    lo, hi = center - step, center + step
    f_lo, f_c, f_hi = f(lo), f(center), f(hi)
    for _ in range(max_expand):
        if f_c <= f_lo and f_c <= f_hi:
            return lo, hi
        if f_lo < f_hi:
            lo, f_lo = lo - (hi - lo), f(lo - (hi - lo))
        else:
            hi, f_hi = hi + (hi - lo), f(hi + (hi - lo))
    return lo, hi


def _golden(f, lo: float, hi: float, tol: float) -> float:
    ratio = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - ratio * (hi - lo)
    x2 = lo + ratio * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - ratio * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + ratio * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)
