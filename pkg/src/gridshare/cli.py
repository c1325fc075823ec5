"""Command-line interface.

Every subcommand loads one scenario file, runs one study, and emits
one CSV table, either to stdout or to ``--out``.  The first line of
the CSV is a comment carrying the command, the scenario digest, and
the seed, so a table can always be traced back to its inputs; given
the same file, seed, and flags the output is byte-identical.  Report
commands (the sweeps, best-response dynamics, partitioning) also
render a figure next to the CSV when writing to a file.

Exit codes: 0 success, 1 argument or scenario errors, 2 infeasible
problem, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import sys
from dataclasses import dataclass

import numpy as np

from .clearing import BidProfile, clear_market, regulate_prices, settle
from .equilibrium import (best_response_dynamics, count_sweep, detect_continuum,
                          equal_partition, flow_sweep, solve_gne,
                          solve_social_optimum, verify_equilibrium)
from .errors import InfeasibleError, ScenarioFormatError, SolverFailureError
from .prosumer import disutility, individual_cost
from .scenarios import LoadedScenario, load_scenario

__all__ = ["main", "RunReport"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting itself."""

    def error(self, message):
        raise _UsageError(message)


@dataclass(frozen=True, eq=False)
class RunReport:
    """One CSV table plus the provenance line written above it."""

    command: str
    digest: str
    seed: int | None
    columns: tuple[str, ...]
    rows: tuple[dict, ...]

    def write(self, stream, precision: int):
        def fmt(value):
            if value is None or value == "":
                return ""
            if isinstance(value, (bool, np.bool_)):
                return "1" if value else "0"
            if isinstance(value, (int, np.integer)):
                return str(int(value))
            if isinstance(value, (float, np.floating)):
                number = float(value)
                if number == 0.0:
                    number = 0.0  # normalize negative zero
                return f"{number:.{precision}g}"
            return str(value)

        seed_text = "-" if self.seed is None else str(self.seed)
        stream.write(f"# gridshare {self.command} digest={self.digest} seed={seed_text}\n")
        stream.write(",".join(self.columns) + "\n")
        for row in self.rows:
            stream.write(",".join(fmt(row.get(column)) for column in self.columns) + "\n")


def _digest(path: str) -> str:
    with open(path, "rb") as handle:
        return hashlib.sha256(handle.read()).hexdigest()[:12]


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise _UsageError(f"{flag} expects at least one value")
    return values


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise _UsageError(f"{flag} expects at least one value")
    return values


def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise _UsageError(f"--grid range syntax is start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise _UsageError(f"--grid expects numbers, got {text!r}") from None
        if step <= 0:
            raise _UsageError("--grid step must be positive")
        count = int(round((stop - start) / step))
        grid = [start + i * step for i in range(count + 1)]
        return [g for g in grid if g <= stop + 1e-12]
    return _parse_float_list(text, "--grid")


_LINE_COLUMNS = ("from", "to", "flow", "limit", "lower_dual", "upper_dual", "binding")


def _line_rows(network, flows, lower, upper, binding):
    rows = []
    for j, line in enumerate(network.lines):
        rows.append({
            "kind": "line", "index": j,
            "from": line.from_bus, "to": line.to_bus,
            "flow": float(flows[j]), "limit": line.flow_limit,
            "lower_dual": float(lower[j]), "upper_dual": float(upper[j]),
            "binding": j in binding,
        })
    return rows


def _cmd_clear(loaded: LoadedScenario, args) -> tuple[RunReport, None]:
    scenario = loaded.scenario
    if args.bids is not None:
        bids = np.array(_parse_float_list(args.bids, "--bids"))
        if bids.size != scenario.n_prosumers:
            raise _UsageError(f"--bids expects {scenario.n_prosumers} values, got {bids.size}")
    elif loaded.bids is not None:
        bids = loaded.bids
    else:
        raise _UsageError("clear needs bids: add a [bids] table to the scenario "
                          "or pass --bids")
    result = clear_market(scenario.network, BidProfile(bids=bids, a=scenario.a),
                          scenario.buses)
    regulated = regulate_prices(result, scenario.prosumers, scenario.a)
    settlement = settle(result, regulated)
    rows = []
    for i in range(scenario.n_prosumers):
        rows.append({
            "kind": "prosumer", "index": i, "bus": int(scenario.buses[i]),
            "bid": float(bids[i]), "price": float(result.prices[i]),
            "regulated_price": float(regulated[i]),
            "quantity": float(result.quantities[i]),
            "payment": float(settlement.payments[i]),
        })
    rows += _line_rows(scenario.network, result.flows,
                       result.flow_lower_duals, result.flow_upper_duals,
                       result.binding_lines)
    rows.append({"kind": "summary", "balance_dual": result.balance_dual,
                 "platform_revenue": settlement.platform_revenue})
    columns = ("kind", "index", "bus", "bid", "price", "regulated_price",
               "quantity", "payment") + _LINE_COLUMNS + ("balance_dual", "platform_revenue")
    return RunReport("clear", args.digest, None, columns, tuple(rows)), None


def _cmd_gne(loaded: LoadedScenario, args) -> tuple[RunReport, None]:
    scenario = loaded.scenario
    result = solve_gne(scenario)
    rows = []
    for i, prosumer in enumerate(scenario.prosumers):
        rows.append({
            "kind": "prosumer", "index": i, "bus": prosumer.bus,
            "bid": float(result.bids[i]), "price": float(result.prices[i]),
            "quantity": float(result.quantities[i]),
            "dispatch_total": float(result.totals[i]),
            "disutility": disutility(prosumer, result.dispatch[i]),
            "cost": float(result.prosumer_costs[i]),
            "individual_cost": individual_cost(prosumer),
        })
    rows += _line_rows(scenario.network, result.flows,
                       result.flow_lower_duals, result.flow_upper_duals,
                       result.binding_lines)
    rows.append({"kind": "summary", "balance_dual": result.balance_dual,
                 "total_disutility": result.total_disutility,
                 "platform_revenue": result.platform_revenue})
    columns = ("kind", "index", "bus", "bid", "price", "quantity", "dispatch_total",
               "disutility", "cost", "individual_cost") + _LINE_COLUMNS + (
               "balance_dual", "total_disutility", "platform_revenue")
    return RunReport("gne", args.digest, None, columns, tuple(rows)), None


def _cmd_sco(loaded: LoadedScenario, args) -> tuple[RunReport, None]:
    scenario = loaded.scenario
    result = solve_social_optimum(scenario)
    rows = []
    for i, prosumer in enumerate(scenario.prosumers):
        rows.append({
            "kind": "prosumer", "index": i, "bus": prosumer.bus,
            "price": float(result.prices[i]),
            "quantity": float(result.quantities[i]),
            "dispatch_total": float(result.totals[i]),
            "disutility": disutility(prosumer, result.dispatch[i]),
        })
    rows += _line_rows(scenario.network, result.flows,
                       result.flow_lower_duals, result.flow_upper_duals,
                       result.binding_lines)
    rows.append({"kind": "summary", "balance_dual": result.balance_dual,
                 "total_disutility": result.total_disutility})
    columns = ("kind", "index", "bus", "price", "quantity", "dispatch_total",
               "disutility") + _LINE_COLUMNS + ("balance_dual", "total_disutility")
    return RunReport("sco", args.digest, None, columns, tuple(rows)), None


def _cmd_brd(loaded: LoadedScenario, args):
    scenario = loaded.scenario
    n = scenario.n_prosumers
    start = None
    if args.start is not None:
        start = np.array(_parse_float_list(args.start, "--start"))
        if start.size != n:
            raise _UsageError(f"--start expects {n} values, got {start.size}")
    result = best_response_dynamics(scenario, initial_bids=start, mode=args.mode,
                                    tol=args.tol, max_rounds=args.rounds)
    bid_columns = tuple(f"bid_{i}" for i in range(n))
    rows = []
    for r, bids in enumerate(result.trajectory):
        change = (float(np.abs(bids - result.trajectory[r - 1]).max())
                  if r else None)
        row = {"round": r, "max_change": change,
               "converged": None if r == 0 else change <= args.tol}
        row.update({f"bid_{i}": float(bids[i]) for i in range(n)})
        rows.append(row)
    report = RunReport("brd", args.digest, None,
                       ("round", "max_change", "converged") + bid_columns, tuple(rows))

    def figure(path):
        from .figures import render_brd
        return render_brd(result.trajectory, path)

    return report, figure


def _cmd_sweep_flow(loaded: LoadedScenario, args):
    scenario = loaded.scenario
    if args.grid is not None:
        grid = _parse_grid(args.grid)
    elif loaded.sweep.flow_grid is not None:
        grid = list(loaded.sweep.flow_grid)
    else:
        raise _UsageError("sweep-flow needs capacities: add [sweep].flow_grid to the "
                          "scenario or pass --grid")
    rows_data = flow_sweep(scenario, grid)
    n = scenario.n_prosumers
    rows = []
    for row in rows_data:
        record = {
            "limit": row.limit, "gne_cost": row.gne_cost, "sco_cost": row.sco_cost,
            "relative_gap": row.relative_gap,
            "gne_price_variance": row.gne_price_variance,
            "sco_price_variance": row.sco_price_variance,
        }
        record.update({f"gne_price_{i}": float(row.gne_prices[i]) for i in range(n)})
        record.update({f"sco_price_{i}": float(row.sco_prices[i]) for i in range(n)})
        rows.append(record)
    columns = ("limit", "gne_cost", "sco_cost", "relative_gap",
               "gne_price_variance", "sco_price_variance")
    columns += tuple(f"gne_price_{i}" for i in range(n))
    columns += tuple(f"sco_price_{i}" for i in range(n))
    report = RunReport("sweep-flow", args.digest, None, columns, tuple(rows))

    def figure(path):
        from .figures import render_flow_sweep
        return render_flow_sweep(rows_data, path)

    return report, figure


def _cmd_sweep_count(loaded: LoadedScenario, args):
    scenario = loaded.scenario
    sweep = loaded.sweep
    if args.counts is not None:
        counts = _parse_int_list(args.counts, "--counts")
    elif sweep.counts is not None:
        counts = list(sweep.counts)
    else:
        raise _UsageError("sweep-count needs market sizes: add [sweep].counts to the "
                          "scenario or pass --counts")
    if any(c < 2 for c in counts):
        raise _UsageError("market sizes must be at least 2")
    seed = args.seed if args.seed is not None else (
        sweep.seed if sweep.seed is not None else 0)
    kwargs = {}
    if sweep.scenarios_per_count is not None:
        kwargs["scenarios_per_count"] = sweep.scenarios_per_count
    if args.draws is not None:
        kwargs["scenarios_per_count"] = args.draws
    if sweep.resources is not None:
        kwargs["resources"] = sweep.resources
    if sweep.coeff_range is not None:
        kwargs["coeff_range"] = sweep.coeff_range
    if sweep.reduction_range is not None:
        kwargs["reduction_range"] = sweep.reduction_range
    rows_data = count_sweep(scenario.network, counts, seed=seed, a=scenario.a, **kwargs)
    rows = [{
        "count": row.count, "scenarios": row.scenarios, "avg_gap": row.avg_gap,
        "min_gap": row.min_gap, "max_gap": row.max_gap,
        "avg_relative_gap": row.avg_relative_gap, "gap_bound": row.gap_bound,
    } for row in rows_data]
    columns = ("count", "scenarios", "avg_gap", "min_gap", "max_gap",
               "avg_relative_gap", "gap_bound")
    report = RunReport("sweep-count", args.digest, seed, columns, tuple(rows))

    def figure(path):
        from .figures import render_count_sweep
        return render_count_sweep(rows_data, path)

    return report, figure


def _cmd_partition(loaded: LoadedScenario, args):
    scenario = loaded.scenario
    kinds = {p.n_resources for p in scenario.prosumers}
    if len(kinds) != 1:
        raise _UsageError("partition requires a uniform resource count per prosumer")
    k = kinds.pop()
    if args.parts is not None:
        parts_list = _parse_int_list(args.parts, "--parts")
    elif loaded.sweep.parts is not None:
        parts_list = [loaded.sweep.parts]
    else:
        parts_list = [m for m in range(1, k + 1) if k % m == 0]
    equilibrium = solve_gne(scenario)
    rows = []
    for parts in parts_list:
        child = equal_partition(scenario, equilibrium, parts)
        child_eq = solve_gne(child)
        rows.append({
            "parts": parts,
            "prosumers": child.n_prosumers,
            "resources_each": k // parts,
            "cost_before": equilibrium.total_disutility,
            "cost_after": child_eq.total_disutility,
            "saving": equilibrium.total_disutility - child_eq.total_disutility,
        })
    columns = ("parts", "prosumers", "resources_each", "cost_before",
               "cost_after", "saving")
    report = RunReport("partition", args.digest, None, columns, tuple(rows))

    def figure(path):
        from .figures import render_partition
        return render_partition(rows, path)

    return report, figure


def _cmd_verify(loaded: LoadedScenario, args) -> tuple[RunReport, None]:
    scenario = loaded.scenario
    equilibrium = solve_gne(scenario)
    diag = verify_equilibrium(scenario, equilibrium)
    continuum = detect_continuum(scenario, samples=args.samples) if args.continuum else None
    checks = [
        ("participation_margin_min", float(diag.participation_margins.min()),
         ">= -1e-07", bool(diag.pareto_ok)),
        ("price_decomposition_residual", diag.price_decomposition_residual,
         "<= 1e-06", diag.price_decomposition_residual <= 1e-6),
        ("regulated_price_residual", diag.regulated_price_residual,
         "<= 1e-06", diag.regulated_price_residual <= 1e-6),
        ("reclear_residual", diag.reclear_residual,
         "<= 1e-06", diag.reclear_residual <= 1e-6),
        ("platform_revenue", diag.platform_revenue,
         ">= -1e-07", diag.platform_revenue >= -1e-7),
        ("revenue_rent_residual", diag.revenue_residual,
         "<= 1e-06", diag.revenue_residual <= 1e-6),
        ("per_capita_gap", diag.per_capita_gap,
         f"<= {diag.gap_bound:.6g}", diag.gap_ok),
    ]
    if continuum is not None:
        checks.append(("continuum_passing_profiles", float(len(continuum.passing_bids)),
                       "report only", True))
    rows = tuple({"check": name, "value": value, "threshold": threshold, "ok": ok}
                 for name, value, threshold, ok in checks)
    return RunReport("verify", args.digest, None,
                     ("check", "value", "threshold", "ok"), rows), None


_COMMANDS = {
    "clear": _cmd_clear,
    "gne": _cmd_gne,
    "sco": _cmd_sco,
    "brd": _cmd_brd,
    "sweep-flow": _cmd_sweep_flow,
    "sweep-count": _cmd_sweep_count,
    "partition": _cmd_partition,
    "verify": _cmd_verify,
}

_FIGURE_COMMANDS = {"brd", "sweep-flow", "sweep-count", "partition"}


def _build_parser() -> _Parser:
    parser = _Parser(prog="gridshare",
                     description="Energy-sharing market studies on constrained networks")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--scenario", required=True, help="scenario TOML file")
        sub.add_argument("--out", help="write the CSV here instead of stdout")
        sub.add_argument("--precision", type=int, default=6,
                         help="significant digits in the CSV (default 6)")
        if name in _FIGURE_COMMANDS:
            sub.add_argument("--figures", action=argparse.BooleanOptionalAction,
                             default=None,
                             help="render a figure next to --out (default: on)")
        return sub

    clear = add("clear", "clear the market for a fixed bid profile")
    clear.add_argument("--bids", help="comma-separated bids, overrides the file")

    add("gne", "solve the sharing-market equilibrium")
    add("sco", "solve the social optimum benchmark")

    brd = add("brd", "iterate best responses from a starting profile")
    brd.add_argument("--start", help="comma-separated starting bids (default zeros)")
    brd.add_argument("--mode", choices=("sequential", "simultaneous"),
                     default="sequential")
    brd.add_argument("--tol", type=float, default=1e-8)
    brd.add_argument("--rounds", type=int, default=500, help="round cap (default 500)")

    sweep_flow = add("sweep-flow", "re-solve over a grid of uniform line capacities")
    sweep_flow.add_argument("--grid", help="capacities: comma list or start:stop:step")

    sweep_count = add("sweep-count", "efficiency gap vs number of prosumers")
    sweep_count.add_argument("--counts", help="comma-separated market sizes")
    sweep_count.add_argument("--seed", type=int, help="random seed (default from file, else 0)")
    sweep_count.add_argument("--draws", type=int, help="scenarios per market size")

    partition = add("partition", "split prosumers and compare total cost")
    partition.add_argument("--parts", help="comma-separated split factors "
                                           "(default: all divisors of the resource count)")

    verify = add("verify", "check equilibrium guarantees on one scenario")
    verify.add_argument("--continuum", action="store_true",
                        help="also probe for an equilibrium continuum")
    verify.add_argument("--samples", type=int, default=21,
                        help="continuum probe sample count")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        loaded = load_scenario(args.scenario)
        args.digest = _digest(args.scenario)
        report, figure = _COMMANDS[args.command](loaded, args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            report.write(handle, args.precision)
        written = [args.out]
        wants_figure = getattr(args, "figures", None)
        if figure is not None and (wants_figure or wants_figure is None):
            figure_path = _sibling_figure_path(args.out)
            written.append(figure(figure_path))
        print("wrote " + " and ".join(written))
    else:
        buffer = io.StringIO()
        report.write(buffer, args.precision)
        sys.stdout.write(buffer.getvalue())
    return 0


def _sibling_figure_path(out_path: str) -> str:
    stem, dot, suffix = out_path.rpartition(".")
    return (stem if dot else out_path) + ".png"


if __name__ == "__main__":
    sys.exit(main())
