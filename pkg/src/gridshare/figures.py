"""Figure rendering for the CLI report path.

Each renderer takes the rows a command already computed for its CSV
and draws the matching picture next to it, so the figure can never
disagree with the data file.  Rendering is headless (Agg) and every
function returns the path it wrote.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_flow_sweep", "render_count_sweep", "render_partition", "render_brd"]

_DPI = 150


def render_flow_sweep(rows, path: str) -> str:
    limits = [r.limit for r in rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    gne_prices = np.array([r.gne_prices for r in rows])
    sco_prices = np.array([r.sco_prices for r in rows])
    for i in range(gne_prices.shape[1]):
        top.plot(limits, gne_prices[:, i], marker="o", label=f"market, prosumer {i}")
        top.plot(limits, sco_prices[:, i], marker="x", linestyle="--",
                 label=f"optimum, prosumer {i}")
    top.set_ylabel("price")
    top.set_title("Prices and total cost vs line capacity")
    top.legend(fontsize=7, ncol=2)
    top.grid(True, alpha=0.3)
    bottom.plot(limits, [r.gne_cost for r in rows], marker="o", label="market total cost")
    bottom.plot(limits, [r.sco_cost for r in rows], marker="x", linestyle="--",
                label="optimum total cost")
    bottom.set_xlabel("uniform line capacity")
    bottom.set_ylabel("total disutility")
    bottom.legend(fontsize=8)
    bottom.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_count_sweep(rows, path: str) -> str:
    counts = [r.count for r in rows]
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    left.plot(counts, [r.avg_gap for r in rows], marker="o", label="average")
    left.fill_between(counts, [r.min_gap for r in rows], [r.max_gap for r in rows],
                      alpha=0.2, label="min to max")
    left.plot(counts, [r.gap_bound for r in rows], linestyle=":", color="k", label="bound")
    left.set_xlabel("number of prosumers")
    left.set_ylabel("per-capita efficiency gap")
    left.legend(fontsize=8)
    left.grid(True, alpha=0.3)
    right.plot(counts, [100 * r.avg_relative_gap for r in rows], marker="o", color="tab:red")
    right.set_xlabel("number of prosumers")
    right.set_ylabel("average relative gap (%)")
    right.grid(True, alpha=0.3)
    fig.suptitle("Efficiency gap shrinks as the market grows")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_partition(rows, path: str) -> str:
    labels = [str(r["parts"]) for r in rows]
    before = [r["cost_before"] for r in rows]
    after = [r["cost_after"] for r in rows]
    x = np.arange(len(rows))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(x - width / 2, before, width, label="before split")
    ax.bar(x + width / 2, after, width, label="after split")
    ax.set_xticks(x, labels)
    ax.set_xlabel("parts per prosumer")
    ax.set_ylabel("total disutility")
    ax.set_title("Splitting prosumers never raises total cost")
    ax.legend(fontsize=8)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_brd(trajectory: np.ndarray, path: str) -> str:
    rounds = np.arange(trajectory.shape[0])
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(trajectory.shape[1]):
        ax.plot(rounds, trajectory[:, i], marker=".", label=f"prosumer {i}")
    ax.set_xlabel("round")
    ax.set_ylabel("bid")
    ax.set_title("Best-response dynamics")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
