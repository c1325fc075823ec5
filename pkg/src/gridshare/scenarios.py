"""Scenario files: a TOML schema for market instances, plus builders.

A scenario file carries the demand slope, the network, the prosumers,
and optionally a bid vector (for plain clearings) and sweep defaults.
The schema is strict: unknown keys are rejected with their dotted
path, wrong types with the expected one, so a typo fails loudly at
parse time instead of silently changing a study.  Example::

    a = 1.0

    [network]
    buses = 2
    slack = 0

    [[network.lines]]
    from = 0
    to = 1
    reactance = 1.0
    flow_limit = 2.0

    [[prosumers]]
    bus = 0
    costs = [2.5]
    reduction = 3.0

    [[prosumers]]
    bus = 1
    costs = [3.5]
    reduction = 7.0

    [bids]
    values = [25.0, 35.0]

The module also hosts the reference instances used throughout the
test-suite and documentation: the two-prosumer benchmark, the
three-bus triangle, and a seven-bus meshed grid.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ScenarioFormatError
from .equilibrium import Scenario
from .network import Line, Network
from .prosumer import Prosumer

__all__ = [
    "SweepDefaults", "LoadedScenario", "parse_scenario", "load_scenario",
    "benchmark_scenario", "triangle_scenario", "sevenbus_network",
    "sevenbus_scenario",
]


@dataclass(frozen=True)
class SweepDefaults:
    """Optional ``[sweep]`` table: defaults for the sweep commands."""

    flow_grid: tuple[float, ...] | None = None
    counts: tuple[int, ...] | None = None
    parts: int | None = None
    seed: int | None = None
    scenarios_per_count: int | None = None
    resources: int | None = None
    coeff_range: tuple[float, float] | None = None
    reduction_range: tuple[float, float] | None = None


@dataclass(frozen=True, eq=False)
class LoadedScenario:
    """Everything a scenario file can specify."""

    scenario: Scenario
    bids: np.ndarray | None = None
    sweep: SweepDefaults = field(default_factory=SweepDefaults)


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ScenarioFormatError(f"missing required key '{key}'", path or "top level")
    return table[key]


def _reject_unknown(table: dict, allowed: set[str], path: str):
    for key in table:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ScenarioFormatError("unknown key", where)


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFormatError(f"expected a number, got {type(value).__name__}", path)
    return float(value)


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioFormatError(f"expected an integer, got {type(value).__name__}", path)
    return value


def _as_float_list(value, path: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ScenarioFormatError("expected a nonempty array of numbers", path)
    return [_as_float(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _as_int_list(value, path: str) -> list[int]:
    if not isinstance(value, list) or not value:
        raise ScenarioFormatError("expected a nonempty array of integers", path)
    return [_as_int(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _as_pair(value, path: str) -> tuple[float, float]:
    values = _as_float_list(value, path)
    if len(values) != 2:
        raise ScenarioFormatError("expected exactly two numbers", path)
    return values[0], values[1]


def _parse_network(table, path: str) -> Network:
    if not isinstance(table, dict):
        raise ScenarioFormatError("expected a table", path)
    _reject_unknown(table, {"buses", "slack", "lines"}, path)
    buses = _as_int(_require(table, "buses", path), f"{path}.buses")
    slack = _as_int(table.get("slack", 0), f"{path}.slack")
    raw_lines = table.get("lines", [])
    if not isinstance(raw_lines, list):
        raise ScenarioFormatError("expected an array of tables", f"{path}.lines")
    lines = []
    for i, raw in enumerate(raw_lines):
        line_path = f"{path}.lines[{i}]"
        if not isinstance(raw, dict):
            raise ScenarioFormatError("expected a table", line_path)
        _reject_unknown(raw, {"from", "to", "reactance", "flow_limit"}, line_path)
        try:
            lines.append(Line(
                from_bus=_as_int(_require(raw, "from", line_path), f"{line_path}.from"),
                to_bus=_as_int(_require(raw, "to", line_path), f"{line_path}.to"),
                reactance=_as_float(raw.get("reactance", 1.0), f"{line_path}.reactance"),
                flow_limit=_as_float(_require(raw, "flow_limit", line_path),
                                     f"{line_path}.flow_limit"),
            ))
        except ValueError as exc:
            raise ScenarioFormatError(str(exc), line_path) from None
    try:
        return Network(n_buses=buses, lines=tuple(lines), slack=slack)
    except ValueError as exc:
        raise ScenarioFormatError(str(exc), path) from None


def _parse_prosumers(raw, path: str) -> tuple[Prosumer, ...]:
    if not isinstance(raw, list) or not raw:
        raise ScenarioFormatError("expected a nonempty array of tables", path)
    prosumers = []
    for i, table in enumerate(raw):
        row_path = f"{path}[{i}]"
        if not isinstance(table, dict):
            raise ScenarioFormatError("expected a table", row_path)
        _reject_unknown(table, {"bus", "costs", "reduction"}, row_path)
        try:
            prosumers.append(Prosumer(
                index=i,
                bus=_as_int(_require(table, "bus", row_path), f"{row_path}.bus"),
                cost_coeffs=tuple(_as_float_list(_require(table, "costs", row_path),
                                                 f"{row_path}.costs")),
                reduction=_as_float(_require(table, "reduction", row_path),
                                    f"{row_path}.reduction"),
            ))
        except ValueError as exc:
            raise ScenarioFormatError(str(exc), row_path) from None
    return tuple(prosumers)


def _parse_sweep(table, path: str) -> SweepDefaults:
    if not isinstance(table, dict):
        raise ScenarioFormatError("expected a table", path)
    allowed = {"flow_grid", "counts", "parts", "seed", "scenarios_per_count",
               "resources", "coeff_range", "reduction_range"}
    _reject_unknown(table, allowed, path)
    kwargs = {}
    if "flow_grid" in table:
        kwargs["flow_grid"] = tuple(_as_float_list(table["flow_grid"], f"{path}.flow_grid"))
    if "counts" in table:
        kwargs["counts"] = tuple(_as_int_list(table["counts"], f"{path}.counts"))
    for key in ("parts", "seed", "scenarios_per_count", "resources"):
        if key in table:
            kwargs[key] = _as_int(table[key], f"{path}.{key}")
    for key in ("coeff_range", "reduction_range"):
        if key in table:
            kwargs[key] = _as_pair(table[key], f"{path}.{key}")
    return SweepDefaults(**kwargs)


def parse_scenario(text: str) -> LoadedScenario:
    """Parse scenario TOML text into validated model objects."""
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioFormatError(f"invalid TOML: {exc}") from None
    _reject_unknown(document, {"a", "network", "prosumers", "bids", "sweep"}, "")
    a = _as_float(_require(document, "a", ""), "a")
    network = _parse_network(_require(document, "network", ""), "network")
    prosumers = _parse_prosumers(_require(document, "prosumers", ""), "prosumers")
    try:
        scenario = Scenario(network=network, prosumers=prosumers, a=a)
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from None
    bids = None
    if "bids" in document:
        table = document["bids"]
        if not isinstance(table, dict):
            raise ScenarioFormatError("expected a table", "bids")
        _reject_unknown(table, {"values"}, "bids")
        values = _as_float_list(_require(table, "values", "bids"), "bids.values")
        if len(values) != scenario.n_prosumers:
            raise ScenarioFormatError(
                f"expected {scenario.n_prosumers} bids, got {len(values)}", "bids.values")
        bids = np.array(values)
    sweep = _parse_sweep(document["sweep"], "sweep") if "sweep" in document else SweepDefaults()
    return LoadedScenario(scenario=scenario, bids=bids, sweep=sweep)


def load_scenario(path: str) -> LoadedScenario:
    """Read and parse a scenario file."""
    try:
        with open(path, "rb") as handle:
            text = handle.read().decode("utf-8")
    except OSError as exc:
        raise ScenarioFormatError(f"cannot read scenario file: {exc}") from None
    except UnicodeDecodeError as exc:
        raise ScenarioFormatError(f"scenario file is not UTF-8: {exc}") from None
    return parse_scenario(text)


def benchmark_scenario(flow_limit: float = 10.0) -> Scenario:
    """Two prosumers on a single line; congested below about 2.43."""
    network = Network(2, (Line(0, 1, reactance=1.0, flow_limit=flow_limit),))
    prosumers = (
        Prosumer(index=0, bus=0, cost_coeffs=(2.5,), reduction=3.0),
        Prosumer(index=1, bus=1, cost_coeffs=(3.5,), reduction=7.0),
    )
    return Scenario(network=network, prosumers=prosumers, a=1.0)


def triangle_scenario(flow_limit: float = 2.0,
                      coeffs: tuple[float, ...] = (2.5, 3.5, 4.5),
                      reductions: tuple[float, ...] = (3.0, 7.0, 11.0)) -> Scenario:
    """Three prosumers on a fully meshed three-bus ring."""
    network = Network(3, (
        Line(0, 1, reactance=1.0, flow_limit=flow_limit),
        Line(1, 2, reactance=1.0, flow_limit=flow_limit),
        Line(0, 2, reactance=1.0, flow_limit=flow_limit),
    ))
    prosumers = tuple(
        Prosumer(index=i, bus=i, cost_coeffs=(coeffs[i],), reduction=reductions[i])
        for i in range(3)
    )
    return Scenario(network=network, prosumers=prosumers, a=1.0)


def sevenbus_network(flow_limit: float = 8.0) -> Network:
    """Seven-bus ring with one chord; maximum degree three."""
    return Network(7, (
        Line(0, 1, reactance=1.0, flow_limit=flow_limit),
        Line(1, 2, reactance=1.0, flow_limit=flow_limit),
        Line(2, 3, reactance=1.0, flow_limit=flow_limit),
        Line(3, 4, reactance=1.0, flow_limit=flow_limit),
        Line(4, 5, reactance=1.0, flow_limit=flow_limit),
        Line(5, 6, reactance=1.0, flow_limit=flow_limit),
        Line(6, 0, reactance=1.0, flow_limit=flow_limit),
        Line(1, 4, reactance=1.0, flow_limit=flow_limit),
    ))


def sevenbus_scenario(count: int = 7, seed: int = 20, flow_limit: float = 8.0,
                      resources: int = 1) -> Scenario:
    """A reproducible random population of the seven-bus grid."""
    from .equilibrium import random_scenario

    rng = np.random.default_rng(seed)
    return random_scenario(rng, sevenbus_network(flow_limit), count, resources=resources)
