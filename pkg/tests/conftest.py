"""Shared builders for the test-suite.

The benchmark instances here are the reference points most tests pin
their frozen numbers to; the random generators are seeded by the
caller so every test run sees the same draws.
"""

from __future__ import annotations

import numpy as np
import pytest

from gridshare.equilibrium import Scenario
from gridshare.network import Line, Network
from gridshare.prosumer import Prosumer
from gridshare.qp import QpProblem


def make_benchmark(flow_limit: float = 10.0) -> Scenario:
    network = Network(2, (Line(0, 1, reactance=1.0, flow_limit=flow_limit),))
    prosumers = (
        Prosumer(index=0, bus=0, cost_coeffs=(2.5,), reduction=3.0),
        Prosumer(index=1, bus=1, cost_coeffs=(3.5,), reduction=7.0),
    )
    return Scenario(network=network, prosumers=prosumers, a=1.0)


def make_triangle(flow_limit: float = 2.0) -> Scenario:
    network = Network(3, (
        Line(0, 1, flow_limit=flow_limit),
        Line(1, 2, flow_limit=flow_limit),
        Line(0, 2, flow_limit=flow_limit),
    ))
    prosumers = (
        Prosumer(index=0, bus=0, cost_coeffs=(2.5,), reduction=3.0),
        Prosumer(index=1, bus=1, cost_coeffs=(3.5,), reduction=7.0),
        Prosumer(index=2, bus=2, cost_coeffs=(4.5,), reduction=11.0),
    )
    return Scenario(network=network, prosumers=prosumers, a=1.0)


@pytest.fixture
def benchmark() -> Scenario:
    return make_benchmark()


@pytest.fixture
def benchmark_congested() -> Scenario:
    return make_benchmark(flow_limit=2.0)


@pytest.fixture
def triangle() -> Scenario:
    return make_triangle()


def random_qp(rng: np.random.Generator) -> QpProblem:
    """Draw a feasible QP with mixed finite/infinite range bounds.

    Feasibility is guaranteed by centering the ranges on a drawn
    anchor point; equality right-hand sides are consistent with the
    same anchor.
    """
    n = int(rng.integers(1, 5))
    n_eq = int(rng.integers(0, 2))
    m = int(rng.integers(1, 7))
    hessian = rng.uniform(0.5, 3.0, size=n)
    gradient = rng.normal(0.0, 2.0, size=n)
    anchor = rng.normal(0.0, 1.0, size=n)
    eq_matrix = rng.normal(0.0, 1.0, size=(n_eq, n))
    eq_rhs = eq_matrix @ anchor
    range_matrix = rng.normal(0.0, 1.0, size=(m, n))
    center = range_matrix @ anchor
    lower = center - rng.uniform(0.1, 1.5, size=m)
    upper = center + rng.uniform(0.1, 1.5, size=m)
    drop_lower = rng.random(m) < 0.2
    drop_upper = (rng.random(m) < 0.2) & ~drop_lower
    lower[drop_lower] = -np.inf
    upper[drop_upper] = np.inf
    return QpProblem(hessian=hessian, gradient=gradient,
                     eq_matrix=eq_matrix, eq_rhs=eq_rhs,
                     range_matrix=range_matrix, range_lower=lower, range_upper=upper)
