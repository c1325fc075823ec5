"""Lossless DC network model with injection-to-flow sensitivities.

The grid is an undirected graph of buses joined by reactive lines.
Under the DC approximation each line carries a flow proportional to
the angle difference across it, and the map from nodal injections to
line flows is linear.  The sensitivity matrix (one row per line, one
column per bus) is built once per network and reused by every market
clearing, so it lives here behind a frozen dataclass.

Sign conventions: injections are positive into the bus, and a line's
flow is positive in its ``from_bus -> to_bus`` direction.  The slack
bus absorbs the residual of any balanced injection vector and its
sensitivity column is identically zero.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Line", "Network", "FlowReport"]


@dataclass(frozen=True)
class Line:
    """One transmission line.

    Parameters
    ----------
    from_bus, to_bus : int
        Endpoint bus indices.  Orientation fixes the flow sign only;
        capacity applies in both directions.
    reactance : float
        Series reactance, must be positive.  Defaults to 1.0, which is
        adequate whenever only the network topology matters.
    flow_limit : float
        Thermal capacity.  Flows are constrained to
        ``[-flow_limit, +flow_limit]``.  May be ``inf``.
    """

    from_bus: int
    to_bus: int
    reactance: float = 1.0
    flow_limit: float = float("inf")

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValueError(f"line may not connect bus {self.from_bus} to itself")
        if not self.reactance > 0.0:
            raise ValueError(f"line reactance must be positive, got {self.reactance}")
        if not self.flow_limit >= 0.0:
            raise ValueError(f"line flow limit must be nonnegative, got {self.flow_limit}")


@dataclass(frozen=True, eq=False)
class FlowReport:
    """Line flows of one injection vector checked against capacity."""

    flows: np.ndarray
    limits: np.ndarray
    utilization: np.ndarray
    overloaded: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not self.overloaded


@dataclass(frozen=True, eq=False)
class Network:
    """A connected DC network.

    Parameters
    ----------
    n_buses : int
        Number of buses, indexed ``0 .. n_buses - 1``.
    lines : tuple[Line, ...]
        The transmission lines.  Parallel lines are allowed.
    slack : int
        Reference bus.  Balanced market quantities are invariant to
        this choice; it only anchors the angle solution.

    Attributes
    ----------
    sensitivity : np.ndarray, shape (n_lines, n_buses)
        Injection-to-flow matrix: ``flows = sensitivity @ injections``
        for any balanced injection vector.  The slack column is zero.
    """

    n_buses: int
    lines: tuple[Line, ...]
    slack: int = 0
    sensitivity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_buses < 1:
            raise ValueError("network needs at least one bus")
        if not 0 <= self.slack < self.n_buses:
            raise ValueError(f"slack bus {self.slack} out of range for {self.n_buses} buses")
        object.__setattr__(self, "lines", tuple(self.lines))
        for line in self.lines:
            for end in (line.from_bus, line.to_bus):
                if not 0 <= end < self.n_buses:
                    raise ValueError(f"line endpoint {end} out of range for {self.n_buses} buses")
        self._check_connected()
        object.__setattr__(self, "sensitivity", self._build_sensitivity())

    def _check_connected(self):
        adjacency: list[set[int]] = [set() for _ in range(self.n_buses)]
        for line in self.lines:
            adjacency[line.from_bus].add(line.to_bus)
            adjacency[line.to_bus].add(line.from_bus)
        seen = {self.slack}
        queue = deque([self.slack])
        while queue:
            bus = queue.popleft()
            for neighbor in adjacency[bus]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    queue.append(neighbor)
        missing = sorted(set(range(self.n_buses)) - seen)
        if missing:
            raise ValueError(f"network is not connected: buses {missing} unreachable from slack")

    def _build_sensitivity(self) -> np.ndarray:
        n, m = self.n_buses, len(self.lines)
        matrix = np.zeros((m, n))
        if m == 0 or n == 1:
            matrix.setflags(write=False)
            return matrix
        susceptance = np.zeros((n, n))
        for line in self.lines:
            w = 1.0 / line.reactance
            f, t = line.from_bus, line.to_bus
            susceptance[f, f] += w
            susceptance[t, t] += w
            susceptance[f, t] -= w
            susceptance[t, f] -= w
        keep = [b for b in range(n) if b != self.slack]
        reduced = susceptance[np.ix_(keep, keep)]
        # (e_f - e_t)^T / x, restricted to non-slack buses, one row per line
        incidence = np.zeros((m, n - 1))
        position = {bus: k for k, bus in enumerate(keep)}
        for row, line in enumerate(self.lines):
            w = 1.0 / line.reactance
            if line.from_bus != self.slack:
                incidence[row, position[line.from_bus]] += w
            if line.to_bus != self.slack:
                incidence[row, position[line.to_bus]] -= w
        matrix[:, keep] = np.linalg.solve(reduced.T, incidence.T).T
        matrix.setflags(write=False)
        return matrix

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def flow_limits(self) -> np.ndarray:
        return np.array([line.flow_limit for line in self.lines])

    @property
    def max_degree(self) -> int:
        """Largest number of lines incident to any single bus."""
        counts = np.zeros(self.n_buses, dtype=int)
        for line in self.lines:
            counts[line.from_bus] += 1
            counts[line.to_bus] += 1
        return int(counts.max()) if self.n_buses else 0

    @property
    def max_flow_limit(self) -> float:
        finite = [line.flow_limit for line in self.lines if np.isfinite(line.flow_limit)]
        return max(finite) if finite else float("inf")

    def line_flows(self, injections: np.ndarray) -> np.ndarray:
        """Flows induced by a balanced injection vector.

        Parameters
        ----------
        injections : np.ndarray, shape (n_buses,)
            Net power injected at each bus.  Must sum to zero within
            tolerance; DC flows are undefined for unbalanced vectors.
        """
        injections = np.asarray(injections, dtype=float)
        if injections.shape != (self.n_buses,):
            raise ValueError(f"expected {self.n_buses} injections, got shape {injections.shape}")
        imbalance = abs(float(injections.sum()))
        if imbalance > 1e-7 * max(1.0, float(np.abs(injections).sum())):
            raise ValueError(f"injections must balance to zero, residual {imbalance:.3e}")
        return self.sensitivity @ injections

    def check_flow_limits(self, injections: np.ndarray, tol: float = 1e-9) -> FlowReport:
        """Evaluate flows and flag lines loaded beyond capacity."""
        flows = self.line_flows(injections)
        limits = self.flow_limits
        with np.errstate(invalid="ignore"):
            utilization = np.where(np.isfinite(limits) & (limits > 0), np.abs(flows) / limits, 0.0)
        overloaded = tuple(int(i) for i in np.flatnonzero(np.abs(flows) > limits + tol))
        return FlowReport(flows=flows, limits=limits, utilization=utilization, overloaded=overloaded)
