"""Supply-demand-function market clearing and settlement.

Prosumers submit bids; each prosumer's net purchase follows the common
demand curve ``q_i = -a * price_i + bid_i``.  The platform picks the
discriminatory price vector of minimum mean square subject to the pool
balancing (purchases sum to zero) and the induced bus injections
respecting line capacities.  Equivalently, the cleared purchases are
the Euclidean projection of the bid vector onto the balanced,
flow-feasible polytope, which is how uniqueness and the price
monotonicity used elsewhere come about.

The balance multiplier and the two flow multiplier families come back
from the QP unscaled; the equilibrium layer rescales them when it
needs congestion rents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qp
from .network import Network

__all__ = ["BidProfile", "ClearingResult", "Settlement",
           "clear_market", "regulate_prices", "settle"]


@dataclass(frozen=True, eq=False)
class BidProfile:
    """Bid vector plus the common demand slope ``a``."""

    bids: np.ndarray
    a: float

    def __post_init__(self):
        # copy so the read-only freeze below cannot leak to the caller
        bids = np.atleast_1d(np.array(self.bids, dtype=float))
        if bids.ndim != 1 or bids.size == 0:
            raise ValueError("bids must be a nonempty vector")
        if not np.all(np.isfinite(bids)):
            raise ValueError("bids must be finite")
        if not self.a > 0:
            raise ValueError(f"demand slope a must be positive, got {self.a}")
        bids.setflags(write=False)
        object.__setattr__(self, "bids", bids)
        object.__setattr__(self, "a", float(self.a))


@dataclass(frozen=True, eq=False)
class ClearingResult:
    """Cleared prices and quantities with the clearing QP's duals.

    ``balance_dual`` is the multiplier on the pool balance equality;
    ``flow_lower_duals`` / ``flow_upper_duals`` attach to the line
    capacity ranges (lower = flow pinned at ``-limit``).  Quantities
    are net purchases, positive when buying from the pool.
    """

    prices: np.ndarray
    quantities: np.ndarray
    balance_dual: float
    flow_lower_duals: np.ndarray
    flow_upper_duals: np.ndarray
    flows: np.ndarray
    binding_lines: tuple[int, ...]
    statuses: tuple[str, ...]
    iterations: int


def _prosumer_sensitivity(network: Network, prosumer_buses: np.ndarray) -> np.ndarray:
    return network.sensitivity[:, prosumer_buses]


def clear_market(network: Network, profile: BidProfile,
                 prosumer_buses, warm: tuple[str, ...] | None = None) -> ClearingResult:
    """Clear the sharing market for one bid profile.

    Parameters
    ----------
    network : Network
    profile : BidProfile
    prosumer_buses : array-like of int
        Bus of each prosumer, aligned with ``profile.bids``.  Several
        prosumers may share a bus.
    warm : tuple of str, optional
        Statuses from a previous clearing on the same network shape.

    Notes
    -----
    The QP is always feasible: zero trade (prices at ``bids / a``)
    balances the pool and loads no line.
    """
    bids = profile.bids
    a = profile.a
    n = bids.size
    buses = np.asarray(prosumer_buses, dtype=int)
    if buses.shape != (n,):
        raise ValueError(f"expected {n} prosumer buses, got shape {buses.shape}")
    if n and (buses.min() < 0 or buses.max() >= network.n_buses):
        raise ValueError("prosumer bus out of range")

    sens = _prosumer_sensitivity(network, buses)
    limits = network.flow_limits
    shift = sens @ bids
    problem = qp.QpProblem(
        hessian=np.full(n, 2.0 / n),
        gradient=np.zeros(n),
        eq_matrix=np.full((1, n), a),
        eq_rhs=np.array([bids.sum()]),
        range_matrix=-a * sens,
        range_lower=-limits - shift,
        range_upper=limits - shift,
    )
    solution = qp.solve(problem, start=bids / a, warm=warm)
    prices = solution.x
    quantities = bids - a * prices
    flows = sens @ quantities
    binding = tuple(int(j) for j, s in enumerate(solution.statuses) if s != "free")
    return ClearingResult(
        prices=prices,
        quantities=quantities,
        balance_dual=float(solution.eq_duals[0]),
        flow_lower_duals=solution.lower_duals,
        flow_upper_duals=solution.upper_duals,
        flows=flows,
        binding_lines=binding,
        statuses=solution.statuses,
        iterations=solution.iterations,
    )


def regulate_prices(result: ClearingResult, prosumers, a: float) -> np.ndarray:
    """Apply the per-prosumer price adjustment to a cleared outcome.

    Buyers pay at least, and sellers receive at most, the marginal
    worth of the traded energy to themselves; see
    ``prosumer.regulated_price``.  At an equilibrium bid profile the
    adjustment leaves prices unchanged.
    """
    from .prosumer import regulated_price  # circular-import guard

    n = len(prosumers)
    if n < 2:
        raise ValueError("price regulation needs at least two prosumers")
    adjusted = np.empty(n)
    for i, prosumer in enumerate(prosumers):
        adjusted[i] = regulated_price(prosumer, float(result.prices[i]),
                                      float(result.quantities[i]), a, n)
    return adjusted


@dataclass(frozen=True, eq=False)
class Settlement:
    """Money flow of one clearing: positive payments flow to the pool."""

    payments: np.ndarray
    platform_revenue: float


def settle(result: ClearingResult, regulated: np.ndarray) -> Settlement:
    payments = np.asarray(regulated, dtype=float) * result.quantities
    return Settlement(payments=payments, platform_revenue=float(payments.sum()))
