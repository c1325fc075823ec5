"""End-to-end CLI tests: exit codes, CSV shape and determinism, seed
precedence, and figure emission."""

import csv
import hashlib
import io

import numpy as np
import pytest

from gridshare.cli import main
from gridshare.errors import InfeasibleError, SolverFailureError

BENCH = "scenarios/benchmark.toml"
TIGHT = "scenarios/benchmark_congested.toml"

NO_BIDS = """
a = 1.0

[network]
buses = 2

[[network.lines]]
from = 0
to = 1
flow_limit = 2.0

[[prosumers]]
bus = 0
costs = [2.5]
reduction = 3.0

[[prosumers]]
bus = 1
costs = [3.5]
reduction = 7.0
"""


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# gridshare ")
    reader = csv.DictReader(io.StringIO("\n".join(lines[1:])))
    return lines[0], list(reader)


def file_digest(path):
    with open(path, "rb") as handle:
        return hashlib.sha256(handle.read()).hexdigest()[:12]


def test_clear_congested_to_stdout(capsys):
    code, out, err = run(capsys, "clear", "--scenario", TIGHT)
    assert code == 0
    assert err == ""
    comment, rows = parse_csv(out)
    assert comment == f"# gridshare clear digest={file_digest(TIGHT)} seed=-"
    prosumers = [r for r in rows if r["kind"] == "prosumer"]
    assert [r["bid"] for r in prosumers] == ["25", "35"]
    assert [r["price"] for r in prosumers] == ["27", "33"]
    assert [r["regulated_price"] for r in prosumers] == ["27", "33"]
    assert [r["payment"] for r in prosumers] == ["-54", "66"]
    lines = [r for r in rows if r["kind"] == "line"]
    assert lines[0]["binding"] == "1"
    assert lines[0]["lower_dual"] == "6"
    summary = [r for r in rows if r["kind"] == "summary"]
    assert summary[0]["platform_revenue"] == "12"


def test_clear_bid_override(capsys):
    code, out, _ = run(capsys, "clear", "--scenario", TIGHT, "--bids", "20,40")
    assert code == 0
    _, rows = parse_csv(out)
    prosumers = [r for r in rows if r["kind"] == "prosumer"]
    assert [r["price"] for r in prosumers] == ["22", "38"]


def test_clear_without_bids_is_usage_error(tmp_path, capsys):
    path = tmp_path / "nobids.toml"
    path.write_text(NO_BIDS)
    code, out, err = run(capsys, "clear", "--scenario", str(path))
    assert code == 1
    assert out == ""
    assert err.startswith("error:")
    assert "bids" in err


def test_wrong_bid_count_is_usage_error(capsys):
    code, _, err = run(capsys, "clear", "--scenario", TIGHT, "--bids", "1,2,3")
    assert code == 1
    assert "expects 2 values" in err


def test_unknown_command_is_usage_error(capsys):
    code, _, err = run(capsys, "melt", "--scenario", TIGHT)
    assert code == 1
    assert err.startswith("error:")


def test_missing_scenario_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "gne")
    assert code == 1
    assert "--scenario" in err


def test_bad_scenario_file_is_exit_one(tmp_path, capsys):
    path = tmp_path / "broken.toml"
    path.write_text("a = [")
    code, _, err = run(capsys, "gne", "--scenario", str(path))
    assert code == 1
    assert "invalid TOML" in err


def test_infeasible_maps_to_exit_two(capsys, monkeypatch):
    def explode(scenario):
        raise InfeasibleError("no balanced dispatch", "equality", 0)
    monkeypatch.setattr("gridshare.cli.solve_gne", explode)
    code, _, err = run(capsys, "gne", "--scenario", BENCH)
    assert code == 2
    assert "certificate" in err


def test_solver_failure_maps_to_exit_three(capsys, monkeypatch):
    def explode(scenario):
        raise SolverFailureError("iteration cap exceeded")
    monkeypatch.setattr("gridshare.cli.solve_gne", explode)
    code, _, err = run(capsys, "gne", "--scenario", BENCH)
    assert code == 3
    assert "iteration cap" in err


def test_gne_matches_frozen_values(capsys):
    code, out, _ = run(capsys, "gne", "--scenario", BENCH, "--precision", "10")
    assert code == 0
    _, rows = parse_csv(out)
    prosumers = [r for r in rows if r["kind"] == "prosumer"]
    assert float(prosumers[0]["bid"]) == pytest.approx(190.0 / 7.0, abs=1e-8)
    assert float(prosumers[1]["bid"]) == pytest.approx(32.0, abs=1e-8)
    summary = [r for r in rows if r["kind"] == "summary"][0]
    assert float(summary["total_disutility"]) == pytest.approx(7194.0 / 49.0, abs=1e-6)


def test_precision_flag_controls_float_text(capsys):
    code, coarse, _ = run(capsys, "gne", "--scenario", BENCH, "--precision", "3")
    assert code == 0
    code, fine, _ = run(capsys, "gne", "--scenario", BENCH, "--precision", "12")
    assert code == 0
    assert "29.6" in coarse
    assert "29.5714285714" in fine


def test_csv_bytes_deterministic(tmp_path, capsys):
    first = tmp_path / "one.csv"
    second = tmp_path / "two.csv"
    for path in (first, second):
        code = main(["gne", "--scenario", TIGHT, "--out", str(path)])
        assert code == 0
    capsys.readouterr()
    assert first.read_bytes() == second.read_bytes()


def test_sweep_count_deterministic_and_seeded(tmp_path, capsys):
    args = ["sweep-count", "--scenario", BENCH, "--counts", "2,3", "--draws", "2"]
    first = tmp_path / "one.csv"
    second = tmp_path / "two.csv"
    for path in (first, second):
        assert main(args + ["--out", str(path), "--no-figures"]) == 0
    capsys.readouterr()
    assert first.read_bytes() == second.read_bytes()
    # no seed anywhere: falls back to 0
    assert first.read_text().splitlines()[0].endswith("seed=0")


def test_seed_precedence(capsys):
    # file sweep table supplies 7 unless the flag overrides it
    code, out, _ = run(capsys, "sweep-count", "--scenario", "scenarios/sevenbus.toml",
                       "--counts", "2", "--draws", "1")
    assert code == 0
    assert out.splitlines()[0].endswith("seed=7")
    code, out, _ = run(capsys, "sweep-count", "--scenario", "scenarios/sevenbus.toml",
                       "--counts", "2", "--draws", "1", "--seed", "3")
    assert code == 0
    assert out.splitlines()[0].endswith("seed=3")


def test_brd_reaches_equilibrium(capsys):
    code, out, _ = run(capsys, "brd", "--scenario", BENCH, "--precision", "10")
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0]["round"] == "0"
    assert rows[0]["max_change"] == ""
    final = rows[-1]
    assert final["converged"] == "1"
    assert float(final["bid_0"]) == pytest.approx(190.0 / 7.0, abs=1e-6)
    assert float(final["bid_1"]) == pytest.approx(32.0, abs=1e-6)


def test_brd_round_cap(capsys):
    code, out, _ = run(capsys, "brd", "--scenario", BENCH, "--rounds", "1")
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[-1]["converged"] == "0"


def test_figures_written_next_to_csv(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code, stdout, _ = run(capsys, "brd", "--scenario", BENCH, "--out", str(out))
    assert code == 0
    figure = tmp_path / "run.png"
    assert out.exists()
    assert figure.exists()
    assert figure.stat().st_size > 0
    assert f"wrote {out} and {figure}" in stdout


def test_no_figures_flag(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code, stdout, _ = run(capsys, "brd", "--scenario", BENCH,
                          "--out", str(out), "--no-figures")
    assert code == 0
    assert out.exists()
    assert not (tmp_path / "run.png").exists()
    assert f"wrote {out}" in stdout


def test_non_report_commands_have_no_figure(tmp_path, capsys):
    out = tmp_path / "eq.csv"
    code, stdout, _ = run(capsys, "gne", "--scenario", BENCH, "--out", str(out))
    assert code == 0
    assert not (tmp_path / "eq.png").exists()
    assert f"wrote {out}" in stdout


def test_sweep_flow_grid_syntax(capsys):
    code, out, _ = run(capsys, "sweep-flow", "--scenario", BENCH,
                       "--grid", "1.0:2.0:0.5")
    assert code == 0
    _, rows = parse_csv(out)
    assert [r["limit"] for r in rows] == ["1", "1.5", "2"]
    for row in rows:
        assert float(row["gne_cost"]) >= float(row["sco_cost"]) - 1e-9


def test_sweep_flow_bad_grid(capsys):
    code, _, err = run(capsys, "sweep-flow", "--scenario", BENCH, "--grid", "1:2")
    assert code == 1
    assert "start:stop:step" in err
    code, _, err = run(capsys, "sweep-flow", "--scenario", BENCH, "--grid", "2:1:0")
    assert code == 1
    code, _, err = run(capsys, "sweep-flow", "--scenario", BENCH, "--grid", "a,b")
    assert code == 1


def test_sweep_count_rejects_tiny_markets(capsys):
    code, _, err = run(capsys, "sweep-count", "--scenario", BENCH, "--counts", "1,2")
    assert code == 1
    assert "at least 2" in err


def test_partition_uses_file_default(capsys):
    code, out, _ = run(capsys, "partition", "--scenario", "scenarios/partition.toml",
                       "--precision", "10")
    assert code == 0
    _, rows = parse_csv(out)
    assert [r["parts"] for r in rows] == ["2"]
    assert float(rows[0]["cost_after"]) <= float(rows[0]["cost_before"]) + 1e-9


def test_partition_explicit_parts(capsys):
    code, out, _ = run(capsys, "partition", "--scenario", "scenarios/partition.toml",
                       "--parts", "1,2,4", "--precision", "10")
    assert code == 0
    _, rows = parse_csv(out)
    costs = [float(r["cost_after"]) for r in rows]
    assert costs[0] >= costs[1] >= costs[2] - 1e-9
    assert float(rows[0]["saving"]) == pytest.approx(0.0, abs=1e-9)
    assert rows[1]["prosumers"] == "4"
    assert rows[2]["resources_each"] == "1"


def test_verify_passes_on_benchmark(capsys):
    code, out, _ = run(capsys, "verify", "--scenario", TIGHT)
    assert code == 0
    _, rows = parse_csv(out)
    assert len(rows) == 7
    assert all(row["ok"] == "1" for row in rows)


def test_verify_with_continuum_probe(capsys):
    code, out, _ = run(capsys, "verify", "--scenario", TIGHT, "--continuum")
    assert code == 0
    _, rows = parse_csv(out)
    probe = [r for r in rows if r["check"] == "continuum_passing_profiles"]
    assert len(probe) == 1
    assert float(probe[0]["value"]) == pytest.approx(7.0)


def test_sco_report(capsys):
    code, out, _ = run(capsys, "sco", "--scenario", BENCH, "--precision", "10")
    assert code == 0
    _, rows = parse_csv(out)
    summary = [r for r in rows if r["kind"] == "summary"][0]
    assert float(summary["total_disutility"]) == pytest.approx(875.0 / 6.0, abs=1e-6)


def test_stdout_and_file_outputs_match(tmp_path, capsys):
    code, out, _ = run(capsys, "gne", "--scenario", TIGHT)
    assert code == 0
    path = tmp_path / "eq.csv"
    assert main(["gne", "--scenario", TIGHT, "--out", str(path)]) == 0
    capsys.readouterr()
    assert path.read_text() == out
